//! Structural outputs computed from retained draws: impulse responses with
//! impact normalization, shock-labelling diagnostics against a proxy series
//! and narrative dates, posterior moments of the shocks, and independence
//! test statistics with permutation nulls.

use crate::error::{Error, Result};
use crate::gibbs::PosteriorSample;
use crate::model::{ScaleInfo, VarCoefficients};
use crate::rng::RngStream;
use crate::stats;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

/// Rescale every shock column so the named variable's impact response
/// equals `value` (in de-standardized units).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IrfNormalization {
    pub variable: usize,
    pub value: f64,
}

/// Impulse responses of one parameter draw: `horizons + 1` matrices, each
/// n x r, horizon 0 first. Propagation is Phi_0 = L and
/// Phi_h = sum_{j=1..min(h,p)} B_j Phi_{h-j}; rows are scaled back to the
/// units of the raw data before any impact normalization.
pub fn compute_irf(
    coef: &VarCoefficients,
    loadings: &DMatrix<f64>,
    scale: &ScaleInfo,
    horizons: usize,
    normalization: Option<&IrfNormalization>,
) -> Result<Vec<DMatrix<f64>>> {
    let (n, r) = loadings.shape();
    if coef.n_vars() != n {
        return Err(Error::Dimension("coefficients and loadings disagree on n".into()));
    }
    if scale.sds.len() != n {
        return Err(Error::Dimension("scale info does not match variable count".into()));
    }
    let p = coef.lags();
    let mut phi: Vec<DMatrix<f64>> = Vec::with_capacity(horizons + 1);
    phi.push(loadings.clone());
    for h in 1..=horizons {
        let mut acc = DMatrix::zeros(n, r);
        for j in 1..=p.min(h) {
            acc += coef.lag_matrix(j) * &phi[h - j];
        }
        phi.push(acc);
    }
    for m in &mut phi {
        for i in 0..n {
            for a in 0..r {
                m[(i, a)] *= scale.sds[i];
            }
        }
    }
    if let Some(norm) = normalization {
        if norm.variable >= n {
            return Err(Error::Domain(format!(
                "normalization variable {} out of range for {n} variables",
                norm.variable
            )));
        }
        let mut factors = vec![0.0; r];
        for (a, f) in factors.iter_mut().enumerate() {
            let impact = phi[0][(norm.variable, a)];
            if impact == 0.0 {
                return Err(Error::Normalization(format!(
                    "impact response of variable {} to shock {a} is zero",
                    norm.variable
                )));
            }
            *f = norm.value / impact;
        }
        for m in &mut phi {
            for a in 0..r {
                for i in 0..n {
                    m[(i, a)] *= factors[a];
                }
            }
        }
        // impact * (value / impact) can round away from value; the pinned
        // entry is exact by definition.
        for a in 0..r {
            phi[0][(norm.variable, a)] = norm.value;
        }
    }
    Ok(phi)
}

/// Posterior impulse responses with pointwise quantile bands.
#[derive(Debug, Clone)]
pub struct IrfResult {
    pub horizons: usize,
    /// Per retained draw: horizons + 1 matrices of n x r responses.
    pub draws: Vec<Vec<DMatrix<f64>>>,
    pub lower: Vec<DMatrix<f64>>,
    pub median: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    /// Probability levels of the lower and upper bands.
    pub band: (f64, f64),
    pub normalization: Option<IrfNormalization>,
}

/// Impulse responses across all retained draws, summarized pointwise. The
/// default band is the central 68% interval.
pub fn posterior_irfs(
    posterior: &PosteriorSample,
    scale: &ScaleInfo,
    horizons: usize,
    normalization: Option<IrfNormalization>,
    band: (f64, f64),
) -> Result<IrfResult> {
    if posterior.n_draws() == 0 {
        return Err(Error::SampleSize("posterior sample is empty".into()));
    }
    if !(band.0 < band.1 && band.0 > 0.0 && band.1 < 1.0) {
        return Err(Error::Domain(format!("invalid band ({}, {})", band.0, band.1)));
    }
    let draws: Vec<Vec<DMatrix<f64>>> = (0..posterior.n_draws())
        .into_par_iter()
        .map(|s| {
            let coef = VarCoefficients::from_matrix(posterior.coef[s].clone(), posterior.p)?;
            compute_irf(&coef, &posterior.loadings[s], scale, horizons, normalization.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let (n, r) = (posterior.n, posterior.r);
    let mut lower = Vec::with_capacity(horizons + 1);
    let mut median = Vec::with_capacity(horizons + 1);
    let mut upper = Vec::with_capacity(horizons + 1);
    let mut buf = vec![0.0; draws.len()];
    for h in 0..=horizons {
        let mut lo = DMatrix::zeros(n, r);
        let mut md = DMatrix::zeros(n, r);
        let mut up = DMatrix::zeros(n, r);
        for i in 0..n {
            for a in 0..r {
                for (s, d) in draws.iter().enumerate() {
                    buf[s] = d[h][(i, a)];
                }
                lo[(i, a)] = stats::quantile(&buf, band.0);
                md[(i, a)] = stats::quantile(&buf, 0.5);
                up[(i, a)] = stats::quantile(&buf, band.1);
            }
        }
        lower.push(lo);
        median.push(md);
        upper.push(up);
    }
    Ok(IrfResult { horizons, draws, lower, median, upper, band, normalization })
}

/// A calendar point (index into the estimation sample) where the shock of
/// interest is expected to have the given sign.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NarrativeDate {
    pub index: usize,
    pub positive: bool,
}

/// Posterior summary of loading x shock at one narrative date.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NarrativeSummary {
    pub index: usize,
    pub positive_expected: bool,
    /// 16%, 50%, 84% quantiles of the product.
    pub quantiles: [f64; 3],
    /// Posterior probability that the product has the expected sign.
    pub sign_match_probability: f64,
}

/// Shock-labelling diagnostics: which factor behaves like the shock the
/// proxy measures.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LabelReport {
    /// Per factor: 16/50/84 quantiles of corr(factor path, proxy).
    pub correlation_quantiles: Vec<[f64; 3]>,
    /// Per factor: median of |corr| across draws.
    pub median_abs_correlation: Vec<f64>,
    /// Per factor: 16/50/84 quantiles of the target-equation loading.
    pub loading_quantiles: Vec<[f64; 3]>,
    /// narrative[factor][date].
    pub narrative: Vec<Vec<NarrativeSummary>>,
    /// Factor with the highest median |correlation|.
    pub selected: usize,
    /// Selection is weak: best median |correlation| below 0.1.
    pub weak: bool,
}

fn quantile_triplet(xs: &[f64]) -> [f64; 3] {
    [stats::quantile(xs, 0.16), stats::quantile(xs, 0.5), stats::quantile(xs, 0.84)]
}

/// Label factors against a proxy series: per-draw correlations, the
/// target-equation loadings, and the loading x shock products at narrative
/// dates.
pub fn label_shocks(
    posterior: &PosteriorSample,
    proxy: &DVector<f64>,
    target_equation: usize,
    narrative: &[NarrativeDate],
) -> Result<LabelReport> {
    let draws = posterior.n_draws();
    if draws == 0 {
        return Err(Error::SampleSize("posterior sample is empty".into()));
    }
    if posterior.r == 0 {
        return Err(Error::NotApplicable("model has no factors to label".into()));
    }
    if proxy.len() != posterior.t {
        return Err(Error::Dimension(format!(
            "proxy has {} observations, sample has {}",
            proxy.len(),
            posterior.t
        )));
    }
    if target_equation >= posterior.n {
        return Err(Error::Domain(format!(
            "target equation {target_equation} out of range for {} variables",
            posterior.n
        )));
    }
    for d in narrative {
        if d.index >= posterior.t {
            return Err(Error::Domain(format!(
                "narrative date index {} out of range for T = {}",
                d.index, posterior.t
            )));
        }
    }
    let proxy_vec: Vec<f64> = proxy.iter().copied().collect();
    let sd = stats::sample_variance(&proxy_vec).sqrt();
    if !(sd > 1e-12) {
        return Err(Error::DegenerateColumn("proxy".into()));
    }

    let r = posterior.r;
    let mut corr = vec![Vec::with_capacity(draws); r];
    let mut load = vec![Vec::with_capacity(draws); r];
    let mut prod = vec![vec![Vec::with_capacity(draws); narrative.len()]; r];
    let mut col = vec![0.0; posterior.t];
    for s in 0..draws {
        for a in 0..r {
            for t in 0..posterior.t {
                col[t] = posterior.factors[s][(t, a)];
            }
            corr[a].push(stats::correlation(&col, &proxy_vec));
            let l = posterior.loadings[s][(target_equation, a)];
            load[a].push(l);
            for (di, d) in narrative.iter().enumerate() {
                prod[a][di].push(l * col[d.index]);
            }
        }
    }

    let median_abs: Vec<f64> = corr
        .iter()
        .map(|c| {
            let abs: Vec<f64> = c.iter().map(|v| v.abs()).collect();
            stats::quantile(&abs, 0.5)
        })
        .collect();
    let selected = (0..r)
        .max_by(|&a, &b| median_abs[a].partial_cmp(&median_abs[b]).expect("finite medians"))
        .expect("at least one factor");
    let narrative_out: Vec<Vec<NarrativeSummary>> = (0..r)
        .map(|a| {
            narrative
                .iter()
                .enumerate()
                .map(|(di, d)| {
                    let xs = &prod[a][di];
                    let matches = xs
                        .iter()
                        .filter(|&&v| if d.positive { v > 0.0 } else { v < 0.0 })
                        .count();
                    NarrativeSummary {
                        index: d.index,
                        positive_expected: d.positive,
                        quantiles: quantile_triplet(xs),
                        sign_match_probability: matches as f64 / xs.len() as f64,
                    }
                })
                .collect()
        })
        .collect();
    Ok(LabelReport {
        correlation_quantiles: corr.iter().map(|c| quantile_triplet(c)).collect(),
        median_abs_correlation: median_abs.clone(),
        loading_quantiles: load.iter().map(|l| quantile_triplet(l)).collect(),
        narrative: narrative_out,
        selected,
        weak: median_abs[selected] < 0.1,
    })
}

/// Posterior summaries of the shocks' sample skewness and kurtosis.
/// Kurtosis is reported raw, so the Gaussian reference value is 3.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentPosterior {
    /// Per factor: 16/50/84 quantiles of sample skewness.
    pub skewness: Vec<[f64; 3]>,
    /// Per factor: 16/50/84 quantiles of sample kurtosis.
    pub kurtosis: Vec<[f64; 3]>,
    /// Per factor: fraction of draws with kurtosis above 3.
    pub excess_kurtosis_probability: Vec<f64>,
}

pub fn nongaussianity_posteriors(posterior: &PosteriorSample) -> Result<MomentPosterior> {
    let draws = posterior.n_draws();
    if draws < 50 {
        return Err(Error::SampleSize(format!(
            "moment posteriors need at least 50 retained draws, got {draws}"
        )));
    }
    let r = posterior.r;
    let mut skew = vec![Vec::with_capacity(draws); r];
    let mut kurt = vec![Vec::with_capacity(draws); r];
    let mut col = vec![0.0; posterior.t];
    for s in 0..draws {
        for a in 0..r {
            for t in 0..posterior.t {
                col[t] = posterior.factors[s][(t, a)];
            }
            skew[a].push(stats::skewness(&col));
            kurt[a].push(stats::excess_kurtosis(&col) + 3.0);
        }
    }
    Ok(MomentPosterior {
        skewness: skew.iter().map(|x| quantile_triplet(x)).collect(),
        kurtosis: kurt.iter().map(|x| quantile_triplet(x)).collect(),
        excess_kurtosis_probability: kurt
            .iter()
            .map(|x| x.iter().filter(|&&v| v > 3.0).count() as f64 / draws as f64)
            .collect(),
    })
}

/// Root mean squared cross-correlation of squared shocks over ordered
/// pairs: sqrt( (1/(K(K-1))) sum_{i != j} Corr(f_i^2, f_j^2)^2 ).
fn shared_volatility_stat(factors: &DMatrix<f64>) -> f64 {
    let (t, r) = factors.shape();
    let sq: Vec<Vec<f64>> = (0..r)
        .map(|a| (0..t).map(|ti| factors[(ti, a)].powi(2)).collect())
        .collect();
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..r {
            if i != j {
                acc += stats::correlation(&sq[i], &sq[j]).powi(2);
            }
        }
    }
    (acc / (r * (r - 1)) as f64).sqrt()
}

/// Empirical squared distance covariance (V-statistic) between a scalar
/// column and a multivariate block, both already transformed; O(T^2).
fn dcov_sq(x: &[f64], block: &DMatrix<f64>, cols: std::ops::Range<usize>) -> f64 {
    let t = x.len();
    let tf = t as f64;
    let mut a = DMatrix::zeros(t, t);
    let mut b = DMatrix::zeros(t, t);
    for k in 0..t {
        for l in (k + 1)..t {
            let da = (x[k] - x[l]).abs();
            let mut db = 0.0;
            for c in cols.clone() {
                db += (block[(k, c)] - block[(l, c)]).powi(2);
            }
            let db = db.sqrt();
            a[(k, l)] = da;
            a[(l, k)] = da;
            b[(k, l)] = db;
            b[(l, k)] = db;
        }
    }
    let center = |m: &mut DMatrix<f64>| {
        let row_means: Vec<f64> = (0..t).map(|k| m.row(k).sum() / tf).collect();
        let grand = row_means.iter().sum::<f64>() / tf;
        for k in 0..t {
            for l in 0..t {
                m[(k, l)] += grand - row_means[k] - row_means[l];
            }
        }
    };
    center(&mut a);
    center(&mut b);
    let mut acc = 0.0;
    for k in 0..t {
        for l in 0..t {
            acc += a[(k, l)] * b[(k, l)];
        }
    }
    acc / (tf * tf)
}

/// Rank-based mutual-dependence aggregate: each column is mapped to
/// ranks / T, then T times the squared distance covariance of column j
/// against the block of columns after j is summed over j.
fn rank_dependence_stat(factors: &DMatrix<f64>) -> f64 {
    let (t, r) = factors.shape();
    let mut ranks = DMatrix::zeros(t, r);
    let mut col = vec![0.0; t];
    for a in 0..r {
        for ti in 0..t {
            col[ti] = factors[(ti, a)];
        }
        for (ti, rk) in stats::average_ranks(&col).into_iter().enumerate() {
            ranks[(ti, a)] = rk / t as f64;
        }
    }
    let mut acc = 0.0;
    let mut x = vec![0.0; t];
    for j in 0..r.saturating_sub(1) {
        for ti in 0..t {
            x[ti] = ranks[(ti, j)];
        }
        acc += t as f64 * dcov_sq(&x, &ranks, (j + 1)..r);
    }
    acc
}

/// Posteriors of the dependence statistics and their permutation nulls:
/// `u`/`s` per retained draw, `u0`/`s0` on shocks independently re-permuted
/// within each column (`perm_reps` permutations per draw).
#[derive(Debug, Clone, serde::Serialize)]
pub struct IndependenceStats {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub u0: Vec<f64>,
    pub s0: Vec<f64>,
}

pub fn independence_stats(
    posterior: &PosteriorSample,
    perm_reps: usize,
    rng: &mut RngStream,
) -> Result<IndependenceStats> {
    if posterior.r < 2 {
        return Err(Error::NotApplicable(
            "independence diagnostics need at least two factors".into(),
        ));
    }
    if posterior.n_draws() == 0 {
        return Err(Error::SampleSize("posterior sample is empty".into()));
    }
    let reps = perm_reps.max(1);
    let (t, r) = (posterior.t, posterior.r);
    // Permuted copies are drawn sequentially so results depend only on the
    // seed; the statistics themselves are computed in parallel.
    let mut permuted: Vec<DMatrix<f64>> = Vec::with_capacity(posterior.n_draws() * reps);
    let mut order: Vec<usize> = (0..t).collect();
    for f in &posterior.factors {
        for _ in 0..reps {
            let mut shuffled = DMatrix::zeros(t, r);
            for a in 0..r {
                order.shuffle(rng);
                for (ti, &src) in order.iter().enumerate() {
                    shuffled[(ti, a)] = f[(src, a)];
                }
            }
            permuted.push(shuffled);
        }
    }
    let observed: Vec<(f64, f64)> = posterior
        .factors
        .par_iter()
        .map(|f| (rank_dependence_stat(f), shared_volatility_stat(f)))
        .collect();
    let null: Vec<(f64, f64)> = permuted
        .par_iter()
        .map(|f| (rank_dependence_stat(f), shared_volatility_stat(f)))
        .collect();
    Ok(IndependenceStats {
        u: observed.iter().map(|&(u, _)| u).collect(),
        s: observed.iter().map(|&(_, s)| s).collect(),
        u0: null.iter().map(|&(u, _)| u).collect(),
        s0: null.iter().map(|&(_, s)| s).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::ProxyState;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn coef_from(n: usize, p: usize, entries: &[f64]) -> VarCoefficients {
        VarCoefficients::from_matrix(DMatrix::from_row_slice(n, 1 + n * p, entries), p).unwrap()
    }

    #[test]
    fn static_model_has_flat_responses() {
        let coef = coef_from(2, 1, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let l = DMatrix::from_row_slice(2, 1, &[0.7, -0.4]);
        let phi =
            compute_irf(&coef, &l, &ScaleInfo::identity(2), 3, None).unwrap();
        assert_eq!(phi[0], l);
        for h in 1..=3 {
            assert_eq!(phi[h].amax(), 0.0);
        }
    }

    #[test]
    fn scalar_geometric_decay() {
        let coef = coef_from(1, 1, &[0.0, 0.5]);
        let l = DMatrix::from_element(1, 1, 1.0);
        let phi = compute_irf(&coef, &l, &ScaleInfo::identity(1), 3, None).unwrap();
        let path: Vec<f64> = phi.iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(path, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn recursion_matches_direct_propagation() {
        // Impulse into a stable VAR(2), propagated through the equations.
        let mut rng = RngStream::new(300, 0);
        let n = 3;
        let p = 2;
        let mut entries = vec![0.0; n * (1 + n * p)];
        for e in entries.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *e = 0.15 * z;
        }
        let coef = VarCoefficients::from_matrix(
            DMatrix::from_row_slice(n, 1 + n * p, &entries),
            p,
        )
        .unwrap();
        let l = DMatrix::from_fn(n, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let h = 12;
        let phi = compute_irf(&coef, &l, &ScaleInfo::identity(n), h, None).unwrap();
        for shock in 0..2 {
            let mut path: Vec<DVector<f64>> = vec![l.column(shock).into_owned()];
            for t in 1..=h {
                let mut next = DVector::zeros(n);
                for j in 1..=p.min(t) {
                    next += coef.lag_matrix(j) * &path[t - j];
                }
                path.push(next);
            }
            for t in 0..=h {
                for i in 0..n {
                    assert!((phi[t][(i, shock)] - path[t][i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn normalization_rescales_and_rejects_zero_impact() {
        let coef = coef_from(2, 1, &[0.0, 0.3, 0.1, 0.0, 0.2, 0.4]);
        let l = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.2, 0.8]);
        let norm = IrfNormalization { variable: 0, value: 0.25 };
        let scale = ScaleInfo { means: vec![0.0, 0.0], sds: vec![2.0, 1.0] };
        // Column 1 has zero impact on variable 0.
        assert!(matches!(
            compute_irf(&coef, &l, &scale, 2, Some(&norm)),
            Err(Error::Normalization(_))
        ));
        let norm1 = IrfNormalization { variable: 1, value: 0.25 };
        let phi = compute_irf(&coef, &l, &scale, 4, Some(&norm1)).unwrap();
        assert!((phi[0][(1, 0)] - 0.25).abs() < 1e-14);
        assert!((phi[0][(1, 1)] - 0.25).abs() < 1e-14);

        // Scaling a loading column leaves the normalized path unchanged.
        let mut l2 = l.clone();
        for i in 0..2 {
            l2[(i, 0)] *= 7.0;
        }
        let phi2 = compute_irf(&coef, &l2, &scale, 4, Some(&norm1)).unwrap();
        for h in 0..=4 {
            assert!((&phi[h] - &phi2[h]).amax() < 1e-12);
        }
        // Without normalization the same rescaling is linear in the path.
        let raw = compute_irf(&coef, &l, &scale, 4, None).unwrap();
        let raw2 = compute_irf(&coef, &l2, &scale, 4, None).unwrap();
        for h in 0..=4 {
            for i in 0..2 {
                assert!((raw2[h][(i, 0)] - 7.0 * raw[h][(i, 0)]).abs() < 1e-12);
                assert!((raw2[h][(i, 1)] - raw[h][(i, 1)]).abs() < 1e-12);
            }
        }
        // De-standardization multiplies rows by their standard deviations.
        let plain = compute_irf(&coef, &l, &ScaleInfo::identity(2), 4, None).unwrap();
        for h in 0..=4 {
            for a in 0..2 {
                assert!((raw[h][(0, a)] - 2.0 * plain[h][(0, a)]).abs() < 1e-12);
                assert!((raw[h][(1, a)] - plain[h][(1, a)]).abs() < 1e-12);
            }
        }
    }

    fn synthetic_posterior<F: FnMut(&mut RngStream, usize) -> DMatrix<f64>>(
        draws: usize,
        t: usize,
        n: usize,
        r: usize,
        loading: &DMatrix<f64>,
        rng: &mut RngStream,
        mut factor_gen: F,
    ) -> PosteriorSample {
        let mut post = PosteriorSample {
            n,
            p: 0,
            r,
            t,
            coef: Vec::new(),
            loadings: Vec::new(),
            sigma2: Vec::new(),
            dof: Vec::new(),
            factors: Vec::new(),
            weights: Vec::new(),
            lambda: Vec::new(),
            proxy: Vec::new(),
        };
        for s in 0..draws {
            post.coef.push(DMatrix::zeros(n, 1));
            post.loadings.push(loading.clone());
            post.sigma2.push(DVector::from_element(n, 1.0));
            post.dof.push(DVector::from_element(r, 10.0));
            post.factors.push(factor_gen(rng, s));
            post.weights.push(DMatrix::from_element(t, r, 1.0));
            post.lambda.push([1.0, 1.0]);
            post.proxy.push(ProxyState { slope: 1.0, noise_variance: 1.0 });
        }
        post
    }

    #[test]
    fn self_proxy_selects_first_factor() {
        let mut rng = RngStream::new(301, 0);
        let t = 200;
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.5, 0.9]);
        let fixed = DMatrix::from_fn(t, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let post = synthetic_posterior(60, t, 2, 2, &l, &mut rng, |_, _| fixed.clone());
        let proxy = DVector::from_fn(t, |ti, _| fixed[(ti, 0)]);
        let report = label_shocks(&post, &proxy, 0, &[]).unwrap();
        assert_eq!(report.selected, 0);
        assert!(!report.weak);
        assert!((report.correlation_quantiles[0][1] - 1.0).abs() < 1e-12);
        for q in &report.correlation_quantiles {
            assert!(q[0] >= -1.0 && q[2] <= 1.0 && q[0] <= q[1] && q[1] <= q[2]);
        }
    }

    #[test]
    fn noise_proxy_is_flagged_weak() {
        let mut rng = RngStream::new(302, 0);
        let t = 300;
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.5, 0.9]);
        let proxy = DVector::from_fn(t, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let post = synthetic_posterior(60, t, 2, 2, &l, &mut rng, |rng, _| {
            DMatrix::from_fn(t, 2, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
        });
        let report = label_shocks(&post, &proxy, 0, &[]).unwrap();
        assert!(report.weak);
        for m in &report.median_abs_correlation {
            assert!(*m < 0.1);
        }
    }

    #[test]
    fn constant_proxy_is_rejected() {
        let mut rng = RngStream::new(303, 0);
        let t = 50;
        let l = DMatrix::from_element(1, 1, 1.0);
        let post = synthetic_posterior(55, t, 1, 1, &l, &mut rng, |rng, _| {
            DMatrix::from_fn(t, 1, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
        });
        let proxy = DVector::from_element(t, 3.0);
        assert!(matches!(
            label_shocks(&post, &proxy, 0, &[]),
            Err(Error::DegenerateColumn(_))
        ));
    }

    #[test]
    fn narrative_products_are_exact_for_deterministic_draws() {
        let mut rng = RngStream::new(304, 0);
        let t = 40;
        let l = DMatrix::from_row_slice(1, 1, &[2.0]);
        let mut fixed = DMatrix::zeros(t, 1);
        for ti in 0..t {
            fixed[(ti, 0)] = ti as f64 * 0.1 - 1.5;
        }
        let post = synthetic_posterior(60, t, 1, 1, &l, &mut rng, |_, _| fixed.clone());
        let proxy = DVector::from_fn(t, |ti, _| fixed[(ti, 0)] + 0.0);
        let dates =
            [NarrativeDate { index: 0, positive: true }, NarrativeDate { index: 20, positive: true }];
        let report = label_shocks(&post, &proxy, 0, &dates).unwrap();
        // Product at date 0: 2.0 * (-1.5) = -3, never positive.
        let d0 = &report.narrative[0][0];
        assert!((d0.quantiles[1] + 3.0).abs() < 1e-12);
        assert_eq!(d0.sign_match_probability, 0.0);
        // Product at date 20: 2.0 * 0.5 = 1, always positive.
        let d1 = &report.narrative[0][1];
        assert!((d1.quantiles[1] - 1.0).abs() < 1e-12);
        assert_eq!(d1.sign_match_probability, 1.0);

        let bad = [NarrativeDate { index: 400, positive: true }];
        assert!(label_shocks(&post, &proxy, 0, &bad).is_err());
    }

    #[test]
    fn moment_posteriors_report_sample_moments() {
        let mut rng = RngStream::new(305, 0);
        let t = 400;
        let l = DMatrix::from_element(1, 1, 1.0);
        let fixed = DMatrix::from_fn(t, 1, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let post = synthetic_posterior(60, t, 1, 1, &l, &mut rng, |_, _| fixed.clone());
        let mp = nongaussianity_posteriors(&post).unwrap();
        let col: Vec<f64> = (0..t).map(|ti| fixed[(ti, 0)]).collect();
        // Deterministic input: every quantile equals the sample moment.
        assert!((mp.skewness[0][1] - stats::skewness(&col)).abs() < 1e-12);
        assert!((mp.kurtosis[0][1] - (stats::excess_kurtosis(&col) + 3.0)).abs() < 1e-12);

        let small = synthetic_posterior(10, t, 1, 1, &l, &mut rng, |_, _| fixed.clone());
        assert!(matches!(nongaussianity_posteriors(&small), Err(Error::SampleSize(_))));
    }

    #[test]
    fn heavy_tailed_factors_show_excess_kurtosis() {
        let mut rng = RngStream::new(306, 0);
        let t = 500;
        let l = DMatrix::from_element(1, 1, 1.0);
        let dist = StudentT::new(4.0).unwrap();
        let post = synthetic_posterior(60, t, 1, 1, &l, &mut rng, |rng, _| {
            DMatrix::from_fn(t, 1, |_, _| dist.sample(rng))
        });
        let mp = nongaussianity_posteriors(&post).unwrap();
        assert!(mp.excess_kurtosis_probability[0] > 0.95);
        assert!(mp.kurtosis[0][1] > 3.0);
    }

    #[test]
    fn duplicated_column_maximizes_shared_volatility() {
        let mut rng = RngStream::new(307, 0);
        let t = 400;
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let post = synthetic_posterior(20, t, 2, 2, &l, &mut rng, |rng, _| {
            let mut f = DMatrix::zeros(t, 2);
            for ti in 0..t {
                let z: f64 = StandardNormal.sample(rng);
                f[(ti, 0)] = z;
                f[(ti, 1)] = z;
            }
            f
        });
        let mut rng2 = RngStream::new(307, 1);
        let stats_out = independence_stats(&post, 1, &mut rng2).unwrap();
        for &s in &stats_out.s {
            assert!((s - 1.0).abs() < 1e-12);
        }
        for &u in &stats_out.u {
            assert!(u > 0.0);
        }
        // Permutation kills the dependence.
        let s0_med = stats::quantile(&stats_out.s0, 0.5);
        assert!(s0_med < 0.5, "null median {s0_med}");
        for &v in stats_out.s.iter().chain(&stats_out.s0) {
            assert!((0.0..=1.0).contains(&v));
        }
        for &v in stats_out.u0.iter() {
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    #[test]
    fn shared_volatility_process_lifts_the_statistic() {
        let mut rng = RngStream::new(308, 0);
        let t = 300;
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let post = synthetic_posterior(30, t, 2, 2, &l, &mut rng, |rng, _| {
            let mut f = DMatrix::zeros(t, 2);
            for ti in 0..t {
                let h: f64 = StandardNormal.sample(rng);
                let vol = (0.3 + 2.0 * h.abs()).sqrt();
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                f[(ti, 0)] = vol * z1;
                f[(ti, 1)] = vol * z2;
            }
            f
        });
        let mut rng2 = RngStream::new(308, 1);
        let out = independence_stats(&post, 1, &mut rng2).unwrap();
        let s_med = stats::quantile(&out.s, 0.5);
        let s0_med = stats::quantile(&out.s0, 0.5);
        assert!(s_med > s0_med, "observed {s_med} vs null {s0_med}");
    }

    #[test]
    fn one_factor_model_is_not_applicable() {
        let mut rng = RngStream::new(309, 0);
        let l = DMatrix::from_element(1, 1, 1.0);
        let post = synthetic_posterior(20, 50, 1, 1, &l, &mut rng, |rng, _| {
            DMatrix::from_fn(50, 1, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
        });
        let mut rng2 = RngStream::new(309, 1);
        assert!(matches!(
            independence_stats(&post, 1, &mut rng2),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn posterior_bands_are_monotone() {
        let mut rng = RngStream::new(310, 0);
        let t = 60;
        let n = 2;
        let mut post = synthetic_posterior(
            40,
            t,
            n,
            1,
            &DMatrix::from_row_slice(2, 1, &[1.0, 0.4]),
            &mut rng,
            |rng, _| {
                DMatrix::from_fn(t, 1, |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                })
            },
        );
        post.p = 1;
        for (s, c) in post.coef.iter_mut().enumerate() {
            *c = DMatrix::zeros(n, 1 + n);
            c[(0, 1)] = 0.3 + 0.002 * s as f64;
            c[(1, 2)] = -0.2;
            for l in post.loadings[s].iter_mut() {
                *l += 0.001 * s as f64;
            }
        }
        let res =
            posterior_irfs(&post, &ScaleInfo::identity(n), 6, None, (0.16, 0.84)).unwrap();
        for h in 0..=6 {
            for i in 0..n {
                assert!(res.lower[h][(i, 0)] <= res.median[h][(i, 0)]);
                assert!(res.median[h][(i, 0)] <= res.upper[h][(i, 0)]);
            }
        }
        assert_eq!(res.draws.len(), 40);
        assert!(posterior_irfs(&post, &ScaleInfo::identity(n), 6, None, (0.9, 0.1)).is_err());
    }
}
