use crate::error::{Error, Result};
use crate::stats::normal_cdf;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

const REJECTION_BUDGET: usize = 100_000;

/// Draw from N(mean, sd^2) truncated to (lower, upper).
///
/// Dispatches between plain rejection (interval carries decent mass),
/// uniform rejection (narrow interval), and exponentially tilted rejection
/// (far tail), so draws stay exact and cheap even when the interval lies
/// many standard deviations from the mean.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Domain(format!("truncated normal sd must be positive, got {sd}")));
    }
    if !mean.is_finite() {
        return Err(Error::Domain(format!("truncated normal mean must be finite, got {mean}")));
    }
    if lower.is_nan() || upper.is_nan() || !(lower < upper) {
        return Err(Error::Domain(format!(
            "truncated normal needs lower < upper, got ({lower}, {upper})"
        )));
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = sample_std(a, b, rng)?;
    Ok(mean + sd * z)
}

fn sample_std<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return Ok(rng.sample(StandardNormal));
    }
    if b == f64::INFINITY {
        return sample_lower(a, rng);
    }
    if a == f64::NEG_INFINITY {
        return sample_lower(-b, rng).map(|z| -z);
    }
    if b <= 0.0 {
        return sample_interval(-b, -a, rng).map(|z| -z);
    }
    sample_interval(a, b, rng)
}

/// Draw conditional on z >= a, with b = +inf.
fn sample_lower<R: Rng + ?Sized>(a: f64, rng: &mut R) -> Result<f64> {
    if a <= 0.0 {
        // At least half the mass is admissible.
        for _ in 0..REJECTION_BUDGET {
            let z: f64 = rng.sample(StandardNormal);
            if z >= a {
                return Ok(z);
            }
        }
        return Err(budget_error(a, f64::INFINITY));
    }
    robert_tail(a, f64::INFINITY, rng)
}

/// Shifted-exponential rejection for a far lower tail, optionally capped
/// above. Acceptance stays bounded away from zero for any a > 0.
fn robert_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let lambda = (a + (a * a + 4.0).sqrt()) / 2.0;
    let exp = Exp::new(lambda).expect("positive rate");
    for _ in 0..REJECTION_BUDGET {
        let z = a + rng.sample::<f64, _>(exp);
        if z > b {
            continue;
        }
        let d = z - lambda;
        if rng.gen::<f64>().ln() <= -0.5 * d * d {
            return Ok(z);
        }
    }
    Err(budget_error(a, b))
}

/// Finite interval with b > 0.
fn sample_interval<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if a <= 0.0 {
        // Interval straddles the mode.
        let mass = normal_cdf(b) - normal_cdf(a);
        if mass >= 0.1 {
            for _ in 0..REJECTION_BUDGET {
                let z: f64 = rng.sample(StandardNormal);
                if z >= a && z <= b {
                    return Ok(z);
                }
            }
            return Err(budget_error(a, b));
        }
        // Narrow interval around 0: uniform proposal, envelope at the mode.
        for _ in 0..REJECTION_BUDGET {
            let z = a + (b - a) * rng.gen::<f64>();
            if rng.gen::<f64>().ln() <= -0.5 * z * z {
                return Ok(z);
            }
        }
        return Err(budget_error(a, b));
    }
    // Positive interval: uniform rejection when narrow against the tail
    // scale 2/(a + sqrt(a^2 + 4)), tilted-exponential rejection otherwise.
    let tail_scale = 2.0 / (a + (a * a + 4.0).sqrt());
    if b - a <= tail_scale {
        for _ in 0..REJECTION_BUDGET {
            let z = a + (b - a) * rng.gen::<f64>();
            if rng.gen::<f64>().ln() <= 0.5 * (a * a - z * z) {
                return Ok(z);
            }
        }
        return Err(budget_error(a, b));
    }
    robert_tail(a, b, rng)
}

fn budget_error(a: f64, b: f64) -> Error {
    Error::Estimator(format!(
        "truncated normal rejection budget exhausted on ({a}, {b}); region mass underflows"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use crate::RngStream;

    fn draw_many(mean: f64, sd: f64, lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| sample_truncated_normal(mean, sd, lo, hi, &mut rng).unwrap()).collect()
    }

    /// Mean of the standard normal truncated to (a, b) via Mills ratios.
    fn truncated_mean(a: f64, b: f64) -> f64 {
        let sf = |z: f64| 0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
        let (num, den) = if b == f64::INFINITY {
            (stats::normal_pdf(a), sf(a))
        } else {
            (stats::normal_pdf(a) - stats::normal_pdf(b), sf(a) - sf(b))
        };
        num / den
    }

    #[test]
    fn unbounded_is_standard_normal() {
        let xs = draw_many(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY, 100_000, 30);
        assert!(stats::mean(&xs).abs() < 0.01);
        assert!((stats::sample_variance(&xs) - 1.0).abs() < 0.02);
    }

    #[test]
    fn half_normal_mean() {
        let xs = draw_many(0.0, 1.0, 0.0, f64::INFINITY, 200_000, 31);
        let expect = (2.0 / std::f64::consts::PI).sqrt();
        assert!((stats::mean(&xs) - expect).abs() < 0.005);
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn five_sigma_tail_matches_mills_ratio() {
        let xs = draw_many(0.0, 1.0, 5.0, f64::INFINITY, 200_000, 32);
        let m = stats::mean(&xs);
        assert!((m - 5.18650).abs() < 0.005, "mean={m}");
        assert!(xs.iter().all(|&x| x >= 5.0));
    }

    #[test]
    fn reflected_tail() {
        let xs = draw_many(0.0, 1.0, f64::NEG_INFINITY, -5.0, 100_000, 33);
        let m = stats::mean(&xs);
        assert!((m + 5.18650).abs() < 0.01, "mean={m}");
        assert!(xs.iter().all(|&x| x <= -5.0));
    }

    #[test]
    fn far_narrow_interval_stays_exact() {
        let xs = draw_many(0.0, 1.0, 10.0, 10.2, 100_000, 34);
        assert!(xs.iter().all(|&x| (10.0..=10.2).contains(&x)));
        let m = stats::mean(&xs);
        let expect = truncated_mean(10.0, 10.2);
        assert!((m - expect).abs() < 2e-3, "mean={m} expect={expect}");
    }

    #[test]
    fn bulk_interval_matches_analytic_mean() {
        let xs = draw_many(0.0, 1.0, -1.0, 2.0, 200_000, 35);
        let expect = truncated_mean(-1.0, 2.0);
        assert!((stats::mean(&xs) - expect).abs() < 0.005);
        assert!(xs.iter().all(|&x| (-1.0..=2.0).contains(&x)));
    }

    #[test]
    fn narrow_interval_around_zero() {
        let xs = draw_many(0.0, 1.0, -0.01, 0.012, 50_000, 36);
        assert!(xs.iter().all(|&x| (-0.01..=0.012).contains(&x)));
    }

    #[test]
    fn positive_wide_interval() {
        let xs = draw_many(0.0, 1.0, 1.0, 30.0, 200_000, 37);
        let expect = truncated_mean(1.0, 30.0);
        assert!((stats::mean(&xs) - expect).abs() < 0.01);
    }

    #[test]
    fn location_scale_transform() {
        let xs = draw_many(3.0, 2.0, 3.0, f64::INFINITY, 200_000, 38);
        let expect = 3.0 + 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((stats::mean(&xs) - expect).abs() < 0.01);
    }

    #[test]
    fn rejects_invalid_arguments() {
        let mut rng = RngStream::new(39, 0);
        assert!(sample_truncated_normal(0.0, 0.0, 0.0, 1.0, &mut rng).is_err());
        assert!(sample_truncated_normal(0.0, -1.0, 0.0, 1.0, &mut rng).is_err());
        assert!(sample_truncated_normal(0.0, 1.0, 1.0, 1.0, &mut rng).is_err());
        assert!(sample_truncated_normal(0.0, 1.0, 2.0, 1.0, &mut rng).is_err());
        assert!(sample_truncated_normal(0.0, 1.0, f64::NAN, 1.0, &mut rng).is_err());
        assert!(sample_truncated_normal(f64::NAN, 1.0, 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn thirty_sigma_tail_still_finite() {
        let xs = draw_many(0.0, 1.0, 30.0, f64::INFINITY, 10_000, 40);
        assert!(xs.iter().all(|&x| x.is_finite() && x >= 30.0));
        // Conditional exceedance of a far tail is roughly 1/a.
        let m = stats::mean(&xs);
        assert!((m - 30.0) < 0.1, "mean={m}");
    }
}
