//! Deviance information criterion on the integrated likelihood: the factor
//! paths are marginalized analytically given the mixture weights, and the
//! weights themselves are integrated out by importance sampling with a
//! moment-fitted inverse-gamma importance density.

use crate::error::{Error, Result};
use crate::gibbs::PosteriorSample;
use crate::kernels::{
    chol_in_place, chol_solve_in_place, fit_inverse_gamma_mle, InverseGammaParams,
};
use crate::rng::RngStream;
use crate::stats;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

const LN_2PI: f64 = 1.8378770664093453;

/// Product inverse-gamma importance density over the T x r mixture weights,
/// one (shape, scale) pair per weight. Every shape exceeds 1 so the family
/// has finite means and well-behaved importance ratios.
#[derive(Debug, Clone)]
pub struct ImportanceFamily {
    t: usize,
    r: usize,
    params: Vec<InverseGammaParams>,
}

impl ImportanceFamily {
    pub fn new(t: usize, r: usize, params: Vec<InverseGammaParams>) -> Result<Self> {
        if params.len() != t * r {
            return Err(Error::Dimension(format!(
                "importance family needs {} parameter pairs, got {}",
                t * r,
                params.len()
            )));
        }
        for (idx, p) in params.iter().enumerate() {
            if p.shape <= 1.0 {
                return Err(Error::Estimator(format!(
                    "importance shape {} <= 1 at (t {}, factor {}) has no mean",
                    p.shape,
                    idx / r.max(1),
                    idx % r.max(1)
                )));
            }
        }
        Ok(ImportanceFamily { t, r, params })
    }

    /// The mixing prior itself as an importance density: every weight of
    /// factor a gets shape = scale = dof[a] / 2.
    pub fn from_prior(dof: &DVector<f64>, t: usize) -> Result<Self> {
        let r = dof.len();
        let mut params = Vec::with_capacity(t * r);
        for _ in 0..t {
            for a in 0..r {
                params.push(InverseGammaParams::new(dof[a] / 2.0, dof[a] / 2.0)?);
            }
        }
        Self::new(t, r, params)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.t, self.r)
    }

    pub fn at(&self, t: usize, a: usize) -> InverseGammaParams {
        self.params[t * self.r + a]
    }

    /// One T x r draw of mixture weights.
    pub fn sample_weights(&self, rng: &mut RngStream) -> DMatrix<f64> {
        DMatrix::from_fn(self.t, self.r, |t, a| self.params[t * self.r + a].sample(rng))
    }

    /// Joint log density of a full weight matrix.
    pub fn log_density(&self, w: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.t {
            for a in 0..self.r {
                acc += self.params[t * self.r + a].ln_pdf(w[(t, a)]);
            }
        }
        acc
    }
}

/// Fit the importance family by per-weight maximum likelihood over retained
/// posterior draws of the weight matrix. Needs at least 20 draws.
pub fn fit_importance_density(weight_draws: &[&DMatrix<f64>]) -> Result<ImportanceFamily> {
    let m = weight_draws.len();
    if m < 20 {
        return Err(Error::SampleSize(format!(
            "importance fitting needs at least 20 weight draws, got {m}"
        )));
    }
    let (t, r) = weight_draws[0].shape();
    if weight_draws.iter().any(|w| w.shape() != (t, r)) {
        return Err(Error::Dimension("weight draws disagree on dimensions".into()));
    }
    let mut params = Vec::with_capacity(t * r);
    let mut buf = vec![0.0; m];
    for ti in 0..t {
        for a in 0..r {
            for (s, w) in weight_draws.iter().enumerate() {
                buf[s] = w[(ti, a)];
            }
            let fit = fit_inverse_gamma_mle(&buf).map_err(|e| {
                Error::Estimator(format!("importance fit at (t {ti}, factor {a}): {e}"))
            })?;
            params.push(fit);
        }
    }
    ImportanceFamily::new(t, r, params)
}

/// Per-parameter-draw quantities reused across every weight draw: residuals,
/// their diagonal quadratic forms, the factor projections L' S^-1 u_t, and
/// the Gram matrix L' S^-1 L.
struct ThetaContext {
    t: usize,
    n: usize,
    r: usize,
    base_quad: Vec<f64>,
    proj: DMatrix<f64>,
    gram: DMatrix<f64>,
    logdet_sigma: f64,
}

impl ThetaContext {
    fn new(
        y: &DMatrix<f64>,
        x: &DMatrix<f64>,
        coef: &DMatrix<f64>,
        loadings: &DMatrix<f64>,
        sigma2: &DVector<f64>,
    ) -> Result<Self> {
        let (t, n) = y.shape();
        let r = loadings.ncols();
        if x.nrows() != t || coef.nrows() != n || coef.ncols() != x.ncols() {
            return Err(Error::Dimension("observations, regressors, and coefficients disagree".into()));
        }
        if loadings.nrows() != n || sigma2.len() != n {
            return Err(Error::Dimension("loadings or noise variances disagree with data".into()));
        }
        if sigma2.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("noise variances must be positive".into()));
        }
        let resid = y - x * coef.transpose();
        // A = S^-1 L, column by column.
        let mut a = loadings.clone();
        for i in 0..n {
            for col in 0..r {
                a[(i, col)] /= sigma2[i];
            }
        }
        let base_quad: Vec<f64> = (0..t)
            .map(|ti| (0..n).map(|i| resid[(ti, i)].powi(2) / sigma2[i]).sum())
            .collect();
        let proj = &resid * &a;
        let gram = loadings.transpose() * &a;
        let logdet_sigma = sigma2.iter().map(|v| v.ln()).sum();
        Ok(ThetaContext { t, n, r, base_quad, proj, gram, logdet_sigma })
    }

    /// log p(y | parameters, W) with the factors integrated out: a Gaussian
    /// with covariance L W_t L' + S per period, evaluated in the low-rank
    /// form through an r x r Cholesky.
    fn log_likelihood(&self, w: &DMatrix<f64>) -> Result<f64> {
        let mut ll = 0.0;
        let mut m = DMatrix::zeros(self.r, self.r);
        let mut b = DVector::zeros(self.r);
        let mut raw = DVector::zeros(self.r);
        let mut sqw = vec![0.0; self.r];
        for ti in 0..self.t {
            let mut quad = self.base_quad[ti];
            let mut logdet = self.logdet_sigma;
            if self.r > 0 {
                for a in 0..self.r {
                    sqw[a] = w[(ti, a)].sqrt();
                }
                for a in 0..self.r {
                    for c in 0..self.r {
                        m[(a, c)] = self.gram[(a, c)] * sqw[a] * sqw[c];
                    }
                    m[(a, a)] += 1.0;
                    b[a] = sqw[a] * self.proj[(ti, a)];
                    raw[a] = b[a];
                }
                if !chol_in_place(&mut m) {
                    return Err(Error::Decomposition {
                        context: format!("integrated-likelihood covariance at t {ti}"),
                    });
                }
                chol_solve_in_place(&m, &mut b);
                quad -= raw.dot(&b);
                for a in 0..self.r {
                    logdet += 2.0 * m[(a, a)].ln();
                }
            }
            ll += -0.5 * (self.n as f64 * LN_2PI + logdet + quad);
        }
        Ok(ll)
    }
}

/// Log density of y given the VAR parameters and a full weight matrix, with
/// the factor paths integrated out analytically.
pub fn conditional_log_likelihood_given_weights(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    coef: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    sigma2: &DVector<f64>,
    weights: &DMatrix<f64>,
) -> Result<f64> {
    let ctx = ThetaContext::new(y, x, coef, loadings, sigma2)?;
    if weights.shape() != (ctx.t, ctx.r) {
        return Err(Error::Dimension(format!(
            "weights are {:?}, expected ({}, {})",
            weights.shape(),
            ctx.t,
            ctx.r
        )));
    }
    ctx.log_likelihood(weights)
}

/// A common set of importance draws with everything that depends only on
/// the draws precomputed: the importance log density and the per-factor
/// sums of log weights and inverse weights the mixing prior needs.
struct CommonDraws {
    weights: Vec<DMatrix<f64>>,
    log_g: Vec<f64>,
    sum_ln: Vec<Vec<f64>>,
    sum_inv: Vec<Vec<f64>>,
}

impl CommonDraws {
    fn draw(family: &ImportanceFamily, reps: usize, rng: &mut RngStream) -> Self {
        let (t, r) = family.dims();
        let mut weights = Vec::with_capacity(reps);
        let mut log_g = Vec::with_capacity(reps);
        let mut sum_ln = Vec::with_capacity(reps);
        let mut sum_inv = Vec::with_capacity(reps);
        for _ in 0..reps {
            let w = family.sample_weights(rng);
            log_g.push(family.log_density(&w));
            let mut sl = vec![0.0; r];
            let mut si = vec![0.0; r];
            for ti in 0..t {
                for a in 0..r {
                    sl[a] += w[(ti, a)].ln();
                    si[a] += 1.0 / w[(ti, a)];
                }
            }
            sum_ln.push(sl);
            sum_inv.push(si);
            weights.push(w);
        }
        CommonDraws { weights, log_g, sum_ln, sum_inv }
    }
}

/// log p(W | v): independent IG(v_a/2, v_a/2) weights, using precomputed
/// per-factor sufficient statistics of one weight draw.
fn log_prior_weights(dof: &DVector<f64>, t: usize, sum_ln: &[f64], sum_inv: &[f64]) -> f64 {
    let mut acc = 0.0;
    for a in 0..dof.len() {
        let alpha = dof[a] / 2.0;
        acc += t as f64 * (alpha * alpha.ln() - statrs::function::gamma::ln_gamma(alpha))
            - (alpha + 1.0) * sum_ln[a]
            - alpha * sum_inv[a];
    }
    acc
}

/// An importance-sampled integrated log likelihood with its effective
/// sample size and the delta-method standard error of the log estimate.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IntegratedLikelihood {
    pub log_value: f64,
    pub ess: f64,
    pub se: f64,
}

fn evaluate_integrated(
    ctx: &ThetaContext,
    dof: &DVector<f64>,
    common: &CommonDraws,
) -> Result<IntegratedLikelihood> {
    let reps = common.weights.len();
    let mut a_vals = Vec::with_capacity(reps);
    for rep in 0..reps {
        let ll = ctx.log_likelihood(&common.weights[rep])?;
        let lp = log_prior_weights(dof, ctx.t, &common.sum_ln[rep], &common.sum_inv[rep]);
        a_vals.push(ll + lp - common.log_g[rep]);
    }
    let peak = a_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Estimator("all importance weights vanished".into()));
    }
    let scaled: Vec<f64> = a_vals.iter().map(|a| (a - peak).exp()).collect();
    let s1: f64 = scaled.iter().sum();
    let s2: f64 = scaled.iter().map(|e| e * e).sum();
    let mean = s1 / reps as f64;
    let var = ((s2 - reps as f64 * mean * mean) / (reps as f64 - 1.0)).max(0.0);
    Ok(IntegratedLikelihood {
        log_value: peak + mean.ln(),
        ess: s1 * s1 / s2,
        se: var.sqrt() / (mean * (reps as f64).sqrt()),
    })
}

/// Importance-sampled integrated likelihood of the data given one set of
/// parameters, drawing `reps` fresh weight matrices from `family`.
#[allow(clippy::too_many_arguments)]
pub fn integrated_likelihood(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    coef: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    sigma2: &DVector<f64>,
    dof: &DVector<f64>,
    family: &ImportanceFamily,
    reps: usize,
    rng: &mut RngStream,
) -> Result<IntegratedLikelihood> {
    if reps < 100 {
        return Err(Error::SampleSize(format!(
            "integrated likelihood needs at least 100 importance draws, got {reps}"
        )));
    }
    let ctx = ThetaContext::new(y, x, coef, loadings, sigma2)?;
    if family.dims() != (ctx.t, ctx.r) {
        return Err(Error::Dimension(format!(
            "importance family is {:?}, expected ({}, {})",
            family.dims(),
            ctx.t,
            ctx.r
        )));
    }
    if dof.len() != ctx.r {
        return Err(Error::Dimension("tail parameters disagree with factor count".into()));
    }
    let common = CommonDraws::draw(family, reps, rng);
    evaluate_integrated(&ctx, dof, &common)
}

/// Which posterior summary the deviance-at-estimate is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CenterStatistic {
    Mean,
    Median,
}

#[derive(Debug, Clone)]
pub struct DicSettings {
    /// Importance draws per likelihood evaluation.
    pub importance_draws: usize,
    /// Posterior weight draws used to fit the importance family.
    pub fit_draws: usize,
    /// Evaluate the deviance at every `stride`-th retained draw.
    pub stride: usize,
    pub center: CenterStatistic,
}

impl Default for DicSettings {
    fn default() -> Self {
        DicSettings {
            importance_draws: 500,
            fit_draws: 2000,
            stride: 1,
            center: CenterStatistic::Mean,
        }
    }
}

/// The criterion and its parts. `dic = d_bar + p_d` holds exactly, with
/// `p_d = d_bar - d_hat`, so `dic` equals `2 d_bar - d_hat`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DicResult {
    pub d_bar: f64,
    pub d_hat: f64,
    pub p_d: f64,
    pub dic: f64,
    /// 5%, 50%, and 95% quantiles of per-evaluation importance ESS.
    pub ess_quantiles: [f64; 3],
    pub importance_draws: usize,
    pub fit_draws: usize,
    pub evaluations: usize,
    pub note: Option<String>,
}

impl DicResult {
    fn assemble(
        d_vals: Vec<f64>,
        d_hat: f64,
        ess: Vec<f64>,
        importance_draws: usize,
        fit_draws: usize,
        note: Option<String>,
    ) -> Self {
        let evaluations = d_vals.len();
        let d_bar = d_vals.iter().sum::<f64>() / evaluations as f64;
        let p_d = d_bar - d_hat;
        DicResult {
            d_bar,
            d_hat,
            p_d,
            dic: d_bar + p_d,
            ess_quantiles: [
                stats::quantile(&ess, 0.05),
                stats::quantile(&ess, 0.5),
                stats::quantile(&ess, 0.95),
            ],
            importance_draws,
            fit_draws,
            evaluations,
            note,
        }
    }
}

fn elementwise_center_mat(draws: &[DMatrix<f64>], center: CenterStatistic) -> DMatrix<f64> {
    let (rows, cols) = draws[0].shape();
    match center {
        CenterStatistic::Mean => {
            let mut acc = DMatrix::zeros(rows, cols);
            for d in draws {
                acc += d;
            }
            acc / draws.len() as f64
        }
        CenterStatistic::Median => DMatrix::from_fn(rows, cols, |i, j| {
            let col: Vec<f64> = draws.iter().map(|d| d[(i, j)]).collect();
            stats::quantile(&col, 0.5)
        }),
    }
}

fn elementwise_center_vec(draws: &[DVector<f64>], center: CenterStatistic) -> DVector<f64> {
    let len = draws[0].len();
    match center {
        CenterStatistic::Mean => {
            let mut acc = DVector::zeros(len);
            for d in draws {
                acc += d;
            }
            acc / draws.len() as f64
        }
        CenterStatistic::Median => DVector::from_fn(len, |i, _| {
            let col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            stats::quantile(&col, 0.5)
        }),
    }
}

/// Evenly spaced draw indices, at most `m` of them.
fn fit_indices(n_draws: usize, m: usize) -> Vec<usize> {
    let m = m.min(n_draws);
    (0..m).map(|i| i * n_draws / m).collect()
}

/// Integrated-likelihood DIC over a retained posterior sample.
///
/// One common set of importance weight draws is shared by every deviance
/// evaluation, including the one at the posterior center, so that model
/// comparisons and the p_d difference are not washed out by independent
/// Monte Carlo noise.
pub fn compute_dic(
    posterior: &PosteriorSample,
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    settings: &DicSettings,
    rng: &mut RngStream,
) -> Result<DicResult> {
    let n_draws = posterior.n_draws();
    if n_draws == 0 {
        return Err(Error::SampleSize("posterior sample is empty".into()));
    }
    let stride = settings.stride.max(1);
    let eval_idx: Vec<usize> = (0..n_draws).step_by(stride).collect();
    let center_coef = elementwise_center_mat(&posterior.coef, settings.center);
    let center_load = elementwise_center_mat(&posterior.loadings, settings.center);
    let center_sigma2 = elementwise_center_vec(&posterior.sigma2, settings.center);
    let center_dof = elementwise_center_vec(&posterior.dof, settings.center);

    if posterior.r == 0 {
        // No latent weights: the integrated likelihood is exact.
        let empty = DMatrix::<f64>::zeros(posterior.t, 0);
        let d_vals: Vec<f64> = eval_idx
            .par_iter()
            .map(|&s| {
                let ctx = ThetaContext::new(
                    y,
                    x,
                    &posterior.coef[s],
                    &posterior.loadings[s],
                    &posterior.sigma2[s],
                )?;
                Ok(-2.0 * ctx.log_likelihood(&empty)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let ctx = ThetaContext::new(y, x, &center_coef, &center_load, &center_sigma2)?;
        let d_hat = -2.0 * ctx.log_likelihood(&empty)?;
        let reps = settings.importance_draws as f64;
        return Ok(DicResult::assemble(
            d_vals,
            d_hat,
            vec![reps; eval_idx.len()],
            settings.importance_draws,
            0,
            None,
        ));
    }

    let fit_refs: Vec<&DMatrix<f64>> = fit_indices(n_draws, settings.fit_draws)
        .into_iter()
        .map(|s| &posterior.weights[s])
        .collect();
    let family = fit_importance_density(&fit_refs)?;
    let common = CommonDraws::draw(&family, settings.importance_draws, rng);

    let evals: Vec<IntegratedLikelihood> = eval_idx
        .par_iter()
        .map(|&s| {
            let ctx = ThetaContext::new(
                y,
                x,
                &posterior.coef[s],
                &posterior.loadings[s],
                &posterior.sigma2[s],
            )?;
            evaluate_integrated(&ctx, &posterior.dof[s], &common)
        })
        .collect::<Result<Vec<_>>>()?;
    let d_vals: Vec<f64> = evals.iter().map(|e| -2.0 * e.log_value).collect();
    let ess: Vec<f64> = evals.iter().map(|e| e.ess).collect();

    let ctx = ThetaContext::new(y, x, &center_coef, &center_load, &center_sigma2)?;
    let at_center = evaluate_integrated(&ctx, &center_dof, &common)?;
    Ok(DicResult::assemble(
        d_vals,
        -2.0 * at_center.log_value,
        ess,
        settings.importance_draws,
        fit_refs.len(),
        None,
    ))
}

/// DIC on the likelihood conditional on the latent factor paths, treating
/// them as parameters. Reported for reference only: this criterion is known
/// to favour the most heavily parameterized model almost always.
pub fn conditional_dic(
    posterior: &PosteriorSample,
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    stride: usize,
) -> Result<DicResult> {
    let n_draws = posterior.n_draws();
    if n_draws == 0 {
        return Err(Error::SampleSize("posterior sample is empty".into()));
    }
    let eval_idx: Vec<usize> = (0..n_draws).step_by(stride.max(1)).collect();
    let ll = |coef: &DMatrix<f64>,
              loadings: &DMatrix<f64>,
              sigma2: &DVector<f64>,
              factors: &DMatrix<f64>|
     -> Result<f64> {
        let resid = y - x * coef.transpose() - factors * loadings.transpose();
        let (t, n) = resid.shape();
        let mut acc = 0.0;
        for i in 0..n {
            let s2 = sigma2[i];
            if !(s2 > 0.0) {
                return Err(Error::Domain("noise variances must be positive".into()));
            }
            let ss: f64 = resid.column(i).iter().map(|u| u * u).sum();
            acc += -0.5 * (t as f64 * (LN_2PI + s2.ln()) + ss / s2);
        }
        Ok(acc)
    };
    let mut d_vals = Vec::with_capacity(eval_idx.len());
    for &s in &eval_idx {
        d_vals.push(
            -2.0 * ll(
                &posterior.coef[s],
                &posterior.loadings[s],
                &posterior.sigma2[s],
                &posterior.factors[s],
            )?,
        );
    }
    let center = CenterStatistic::Mean;
    let d_hat = -2.0
        * ll(
            &elementwise_center_mat(&posterior.coef, center),
            &elementwise_center_mat(&posterior.loadings, center),
            &elementwise_center_vec(&posterior.sigma2, center),
            &elementwise_center_mat(&posterior.factors, center),
        )?;
    let note = "conditional on latent factors and weights; known to favour the most complex model";
    log::warn!("{note}");
    Ok(DicResult::assemble(d_vals, d_hat, vec![0.0; eval_idx.len()], 0, 0, Some(note.into())))
}
