use crate::error::{Error, Result};
use crate::stats::{digamma, trigamma};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Shape/scale parameters of an inverse-gamma distribution with density
/// proportional to x^-(shape+1) exp(-scale/x) on x > 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InverseGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::Domain(format!("inverse-gamma shape must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("inverse-gamma scale must be positive, got {scale}")));
        }
        Ok(InverseGammaParams { shape, scale })
    }

    /// Mean scale/(shape-1); None when shape <= 1.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    /// Variance; None when shape <= 2.
    pub fn variance(&self) -> Option<f64> {
        (self.shape > 2.0)
            .then(|| self.scale * self.scale / ((self.shape - 1.0).powi(2) * (self.shape - 2.0)))
    }

    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln()
            - statrs::function::gamma::ln_gamma(self.shape)
            - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_inverse_gamma(*self, rng)
    }
}

/// Draw from an inverse gamma by inverting a gamma draw.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(params: InverseGammaParams, rng: &mut R) -> f64 {
    let g = Gamma::new(params.shape, 1.0 / params.scale)
        .expect("validated inverse-gamma parameters")
        .sample(rng);
    // A zero gamma draw can only arise from underflow at tiny shapes.
    1.0 / g.max(f64::MIN_POSITIVE)
}

/// Maximum-likelihood inverse-gamma fit.
///
/// Solves ln(shape) - digamma(shape) = mean(ln x) + ln(mean(1/x)) by Newton
/// iteration from the standard closed-form starting value, then sets
/// scale = shape / mean(1/x). Errors when the draws are constant (the
/// likelihood is unbounded) or when the fitted shape is at most 1 (the
/// fitted family has no mean, which breaks importance-weight moments).
pub fn fit_inverse_gamma_mle(samples: &[f64]) -> Result<InverseGammaParams> {
    if samples.len() < 2 {
        return Err(Error::SampleSize(format!(
            "inverse-gamma fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain("inverse-gamma fit requires positive finite samples".into()));
    }
    let n = samples.len() as f64;
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let mean_inv = samples.iter().map(|x| 1.0 / x).sum::<f64>() / n;
    // Jensen gap; zero iff the sample is constant.
    let c = mean_ln + mean_inv.ln();
    if !(c > 1e-13) {
        return Err(Error::Estimator(
            "inverse-gamma fit is degenerate: samples are (numerically) constant".into(),
        ));
    }

    let mut alpha = (3.0 - c + ((c - 3.0).powi(2) + 24.0 * c).sqrt()) / (12.0 * c);
    for _ in 0..100 {
        let g = alpha.ln() - digamma(alpha) - c;
        let gp = 1.0 / alpha - trigamma(alpha);
        let step = g / gp;
        let mut next = alpha - step;
        if next <= 0.0 {
            next = alpha / 2.0;
        }
        let done = (next - alpha).abs() <= 1e-12 * alpha.abs();
        alpha = next;
        if done {
            break;
        }
    }
    if !alpha.is_finite() {
        return Err(Error::Convergence("inverse-gamma shape iteration diverged".into()));
    }
    if alpha <= 1.0 {
        return Err(Error::Estimator(format!(
            "fitted inverse-gamma shape {alpha:.4} <= 1 has no mean; importance family rejected"
        )));
    }
    InverseGammaParams::new(alpha, alpha / mean_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;

    #[test]
    fn rejects_bad_parameters() {
        assert!(InverseGammaParams::new(0.0, 1.0).is_err());
        assert!(InverseGammaParams::new(1.0, -1.0).is_err());
        assert!(InverseGammaParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn moments_match_formulas() {
        let p = InverseGammaParams::new(3.0, 2.0).unwrap();
        assert_eq!(p.mean(), Some(1.0));
        assert_eq!(p.variance(), Some(1.0));
        assert_eq!(InverseGammaParams::new(0.5, 1.0).unwrap().mean(), None);
    }

    #[test]
    fn sample_mean_of_ig_3_2_is_one() {
        let p = InverseGammaParams::new(3.0, 2.0).unwrap();
        let mut rng = RngStream::new(100, 0);
        let n = 200_000;
        let mean = (0..n).map(|_| p.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean={mean}");
    }

    #[test]
    fn samples_are_positive() {
        let p = InverseGammaParams::new(0.5, 0.5).unwrap();
        let mut rng = RngStream::new(100, 1);
        for _ in 0..10_000 {
            assert!(p.sample(&mut rng) > 0.0);
        }
    }

    #[test]
    fn ln_pdf_peaks_at_mode() {
        let p = InverseGammaParams::new(3.0, 2.0).unwrap();
        let m = p.mode();
        assert!(p.ln_pdf(m) > p.ln_pdf(m * 0.9));
        assert!(p.ln_pdf(m) > p.ln_pdf(m * 1.1));
        assert_eq!(p.ln_pdf(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn mle_recovers_parameters() {
        let p = InverseGammaParams::new(5.0, 3.0).unwrap();
        let mut rng = RngStream::new(100, 2);
        let xs: Vec<f64> = (0..100_000).map(|_| p.sample(&mut rng)).collect();
        let fit = fit_inverse_gamma_mle(&xs).unwrap();
        assert!((fit.shape / 5.0 - 1.0).abs() < 0.05, "shape={}", fit.shape);
        assert!((fit.scale / 3.0 - 1.0).abs() < 0.05, "scale={}", fit.scale);
    }

    #[test]
    fn mle_rejects_constant_samples() {
        let xs = vec![2.0; 50];
        assert!(matches!(fit_inverse_gamma_mle(&xs), Err(Error::Estimator(_))));
    }

    #[test]
    fn mle_rejects_shape_at_most_one() {
        // Draws from a shape-0.7 law have no mean; the fit must refuse them.
        let p = InverseGammaParams::new(0.7, 1.0).unwrap();
        let mut rng = RngStream::new(100, 3);
        let xs: Vec<f64> = (0..50_000).map(|_| p.sample(&mut rng)).collect();
        assert!(matches!(fit_inverse_gamma_mle(&xs), Err(Error::Estimator(_))));
    }

    #[test]
    fn mle_rejects_nonpositive_samples() {
        assert!(fit_inverse_gamma_mle(&[1.0, -2.0, 3.0]).is_err());
        assert!(fit_inverse_gamma_mle(&[1.0]).is_err());
    }
}
