//! Small statistical utilities shared across the crate: moments, ranks,
//! stable summation, gamma-function derivatives, Kolmogorov-Smirnov tests,
//! quantiles, and autocorrelation-adjusted effective sample sizes.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (denominator n - 1).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

fn central_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = xs.len() as f64;
    (m, m2 / n, m3 / n, m4 / n)
}

/// Moment-based sample skewness m3 / m2^(3/2).
pub fn skewness(xs: &[f64]) -> f64 {
    let (_, m2, m3, _) = central_moments(xs);
    m3 / m2.powf(1.5)
}

/// Moment-based sample excess kurtosis m4 / m2^2 - 3.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let (_, m2, _, m4) = central_moments(xs);
    m4 / (m2 * m2) - 3.0
}

/// Pearson correlation; NaN when either input is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "correlation inputs must match in length");
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// 1-based ranks with ties receiving the average of the tied positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("ranks: NaN in input"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// log(sum(exp(xs))) without overflow; -inf for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Pairwise (cascade) summation: deterministic and accurate for long sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 16 => xs.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Linear-interpolation quantile on an unsorted slice, 0 <= q <= 1.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    assert!(!xs.is_empty(), "quantile of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("quantile: NaN in input"));
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// First derivative of digamma, by recurrence into the asymptotic region.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma requires x > 0");
    let mut x = x;
    let mut acc = 0.0;
    while x < 9.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Asymptotic series 1/x + 1/(2x^2) + sum B_2k / x^(2k+1).
    let series = inv
        + 0.5 * inv2
        + inv2
            * inv
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    acc + series
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * x).powi(2)).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::SampleSize(format!(
            "Kolmogorov-Smirnov needs at least 8 points per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("ks: NaN in input"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("ks: NaN in input"));
    let (n, m) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let scale = ((n * m) as f64 / (n + m) as f64).sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_sf(scale * d) })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsTest> {
    if xs.len() < 8 {
        return Err(Error::SampleSize(format!(
            "Kolmogorov-Smirnov needs at least 8 points, got {}",
            xs.len()
        )));
    }
    let mut v = xs.to_vec();
    v.sort_by(|x, y| x.partial_cmp(y).expect("ks: NaN in input"));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (k, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - k as f64 / n).abs());
        d = d.max(((k + 1) as f64 / n - f).abs());
    }
    Ok(KsTest { statistic: d, p_value: kolmogorov_sf(n.sqrt() * d) })
}

/// Effective sample size by Geyer's initial positive sequence estimator.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(chain);
    let c0: f64 = chain.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        // Constant chain carries no Monte Carlo error.
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        chain[..n - lag]
            .iter()
            .zip(&chain[lag..])
            .map(|(x, y)| (x - m) * (y - m))
            .sum::<f64>()
            / n as f64
    };
    let mut sum_rho = 0.0;
    let mut k = 1;
    let mut prev_pair = f64::INFINITY;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k - 1) + autocov(2 * k)) / c0;
        if pair <= 0.0 {
            break;
        }
        // Enforce monotone decrease of the paired sums.
        let pair = pair.min(prev_pair);
        sum_rho += pair;
        prev_pair = pair;
        k += 1;
    }
    let tau = 1.0 + 2.0 * sum_rho;
    (n as f64 / tau).min(n as f64)
}

/// Batch-means Monte Carlo standard error of the chain mean.
pub fn batch_means_se(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 16 {
        return (sample_variance(chain) / n as f64).sqrt();
    }
    let b = (n as f64).sqrt().floor() as usize;
    let nb = n / b;
    let used = nb * b;
    let mo = mean(&chain[..used]);
    let mut s2 = 0.0;
    for k in 0..nb {
        let bm = mean(&chain[k * b..(k + 1) * b]);
        s2 += (bm - mo).powi(2);
    }
    s2 *= b as f64 / (nb - 1) as f64;
    (s2 / used as f64).sqrt()
}
