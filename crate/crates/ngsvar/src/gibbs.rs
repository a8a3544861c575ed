//! Fixed-scan Gibbs sampler for the factor VAR. One sweep updates, in
//! order: the factor paths, the VAR coefficients jointly with the loadings
//! equation by equation, the scale-mixture weights, the tail parameters,
//! the idiosyncratic variances, the two group shrinkage scales, the local
//! shrinkage scales, and the auxiliary mixture variables; an optional proxy
//! measurement equation is updated last.

use crate::error::{Error, Result};
use crate::kernels::{
    sample_block_in_place, sample_griddy, sample_inverse_gamma, InverseGammaParams,
};
use crate::model::{FactorStructure, LatentBlock, ModelSpec, VarCoefficients};
use crate::priors::{
    equation_prior, lambda_conditional, lambda_group_stats, psi_conditional, z_conditional,
    CoefGroup, MinnesotaHierarchy, MinnesotaTables, CROSS, OWN,
};
use crate::restrict::{embed, sample_constrained_gaussian, SignConstraint, SIGN_GIBBS_SWEEPS};
use crate::rng::RngStream;
use crate::stats;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;

/// Chain length and discretization controls.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SamplerSettings {
    pub burn_in: usize,
    pub retain: usize,
    pub thin: usize,
    /// Grid points for the tail-parameter draw.
    pub griddy_grid: usize,
    pub seed: u64,
    /// Substream index; concurrent chains or replications get distinct ones.
    pub stream: u64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            burn_in: 5000,
            retain: 5000,
            thin: 1,
            griddy_grid: 200,
            seed: 1,
            stream: 0,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.retain == 0 {
            return Err(Error::Config("retain must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.griddy_grid < 2 {
            return Err(Error::Config("griddy grid needs at least 2 points".into()));
        }
        Ok(())
    }
}

/// Parameters of the proxy measurement equation m_t = slope * f_target,t + e_t.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProxyState {
    pub slope: f64,
    pub noise_variance: f64,
}

/// Full parameter-and-latent state of one chain.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub coef: VarCoefficients,
    pub structure: FactorStructure,
    pub latent: LatentBlock,
    pub hierarchy: MinnesotaHierarchy,
    pub proxy: Option<ProxyState>,
}

/// Per-chain constants: data views, the prior tables, and the fixed cross
/// products of the design.
pub struct SweepCtx<'a> {
    pub y: &'a DMatrix<f64>,
    pub x: &'a DMatrix<f64>,
    pub proxy_series: Option<&'a DVector<f64>>,
    pub tables: MinnesotaTables,
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
}

impl<'a> SweepCtx<'a> {
    pub fn new(
        spec: &ModelSpec,
        y: &'a DMatrix<f64>,
        x: &'a DMatrix<f64>,
        proxy_series: Option<&'a DVector<f64>>,
    ) -> Result<Self> {
        let t = y.nrows();
        if x.nrows() != t {
            return Err(Error::Dimension(format!(
                "response has {t} rows but design has {}",
                x.nrows()
            )));
        }
        if y.ncols() != spec.n || x.ncols() != spec.design_width() {
            return Err(Error::Dimension(format!(
                "data is {}x{} with design width {}, model wants {}x{} width {}",
                t,
                y.ncols(),
                x.ncols(),
                t,
                spec.n,
                spec.design_width()
            )));
        }
        if spec.restrictions.proxy.is_some() != proxy_series.is_some() {
            return Err(Error::Config(
                "a proxy restriction and a proxy series must be supplied together".into(),
            ));
        }
        if let Some(m) = proxy_series {
            if m.len() != t {
                return Err(Error::Dimension(format!(
                    "proxy series has {} rows, data has {t}",
                    m.len()
                )));
            }
        }
        let tables = MinnesotaTables::new(spec.n, spec.p, &spec.prior);
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        Ok(SweepCtx { y, x, proxy_series, tables, xtx, xty })
    }
}

/// Deterministic starting point; only the loadings are randomized, with
/// restrictions already honored so the first sweep starts feasible.
pub fn init_state(spec: &ModelSpec, t: usize, rng: &mut RngStream) -> Result<GibbsState> {
    let (n, p, r) = (spec.n, spec.p, spec.r);
    let tables = MinnesotaTables::new(n, p, &spec.prior);
    let mut coef = VarCoefficients::zeros(n, p);
    for i in 0..n {
        coef.as_matrix_mut().row_mut(i).copy_from(&tables.mean_row(i).transpose());
    }
    let mut loadings = DMatrix::zeros(n, r);
    for i in 0..n {
        for a in 0..r {
            let z: f64 = StandardNormal.sample(rng);
            loadings[(i, a)] = 0.1 * z;
        }
    }
    for (i, a) in spec.restrictions.zeros() {
        loadings[(i, a)] = 0.0;
    }
    for ((i, a), s) in spec.restrictions.signs() {
        if !s.satisfied_by(loadings[(i, a)]) {
            loadings[(i, a)] = -loadings[(i, a)];
        }
    }
    let structure = FactorStructure::new(loadings, DVector::from_element(n, 1.0))?;
    let latent = LatentBlock::new(
        DMatrix::zeros(t, r),
        DMatrix::from_element(t, r, 1.0),
        DVector::from_element(r, 10.0),
    )?;
    let proxy = spec
        .restrictions
        .proxy
        .as_ref()
        .map(|_| ProxyState { slope: 1.0, noise_variance: 1.0 });
    Ok(GibbsState {
        coef,
        structure,
        latent,
        hierarchy: MinnesotaHierarchy::init(n, p),
        proxy,
    })
}

/// Per-period system of the factor conditional: independent r-dimensional
/// Gaussians with precision diag(1/w_t) + L' S^-1 L, plus the proxy
/// equation's contribution on its target coordinate. Shared by the sweep
/// and by the exposed conditional moments so both see the same assembly.
struct FactorSystem {
    /// L' S^-1.
    lsig: DMatrix<f64>,
    /// lsig L, the weight-free part of the precision.
    a_mat: DMatrix<f64>,
    resid: DMatrix<f64>,
    /// (target, slope, noise variance) of the proxy equation, if any.
    proxy: Option<(usize, f64, f64)>,
}

impl FactorSystem {
    fn new(state: &GibbsState, ctx: &SweepCtx, spec: &ModelSpec) -> FactorSystem {
        let (n, r) = (spec.n, spec.r);
        let resid = ctx.y - state.coef.fitted(ctx.x);
        let mut lsig = DMatrix::zeros(r, n);
        for a in 0..r {
            for i in 0..n {
                lsig[(a, i)] =
                    state.structure.loadings[(i, a)] / state.structure.noise_variances[i];
            }
        }
        let a_mat = &lsig * &state.structure.loadings;
        let proxy = match (spec.restrictions.proxy.as_ref(), state.proxy.as_ref()) {
            (Some(p), Some(px)) => Some((p.target, px.slope, px.noise_variance)),
            _ => None,
        };
        FactorSystem { lsig, a_mat, resid, proxy }
    }

    /// Fill the period-s precision and linear term.
    fn fill(
        &self,
        state: &GibbsState,
        series: Option<&DVector<f64>>,
        s: usize,
        prec: &mut DMatrix<f64>,
        rhs: &mut DVector<f64>,
    ) {
        let (r, n) = self.lsig.shape();
        prec.copy_from(&self.a_mat);
        for a in 0..r {
            prec[(a, a)] += 1.0 / state.latent.weights[(s, a)];
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.lsig[(a, i)] * self.resid[(s, i)];
            }
            rhs[a] = acc;
        }
        if let (Some((tgt, slope, nv)), Some(m)) = (self.proxy, series) {
            prec[(tgt, tgt)] += slope * slope / nv;
            rhs[tgt] += slope * m[s] / nv;
        }
    }
}

fn step_factors(
    state: &mut GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    rng: &mut RngStream,
) -> Result<()> {
    let r = spec.r;
    if r == 0 {
        return Ok(());
    }
    let t = ctx.y.nrows();
    let sys = FactorSystem::new(state, ctx, spec);
    let mut prec = DMatrix::zeros(r, r);
    let mut rhs = DVector::zeros(r);
    let mut z = DVector::zeros(r);
    for s in 0..t {
        sys.fill(state, ctx.proxy_series, s, &mut prec, &mut rhs);
        sample_block_in_place(&mut prec, &mut rhs, &mut z, rng)?;
        for a in 0..r {
            state.latent.factors[(s, a)] = rhs[a];
        }
    }
    Ok(())
}

/// Conditional mean and covariance of the factor paths given every other
/// block, solved from the same per-period systems the sweep samples from.
/// The conditional factorizes over time, so the covariance comes back as
/// one r x r block per period.
pub fn factor_conditional_moments(
    state: &GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let r = spec.r;
    if r == 0 {
        return Err(Error::NotApplicable("the model has no factors".into()));
    }
    let t = ctx.y.nrows();
    let sys = FactorSystem::new(state, ctx, spec);
    let mut mean = DMatrix::zeros(t, r);
    let mut covs = Vec::with_capacity(t);
    let mut prec = DMatrix::zeros(r, r);
    let mut rhs = DVector::zeros(r);
    for s in 0..t {
        sys.fill(state, ctx.proxy_series, s, &mut prec, &mut rhs);
        let chol = prec
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Decomposition { context: "factor precision".into() })?;
        let mu = chol.solve(&rhs);
        for a in 0..r {
            mean[(s, a)] = mu[a];
        }
        covs.push(chol.inverse());
    }
    Ok((mean, covs))
}

/// VAR coefficients and loadings, drawn jointly equation by equation from
/// the Gaussian regression of y_i on (X, F). Zero-restricted loadings are
/// dropped from the regression; sign-restricted equations go through the
/// truncated coordinate scan.
/// Precision and linear term of equation i's joint (lag coefficients,
/// active loadings) conditional; the returned list names the factor
/// columns kept in the regression after zero restrictions.
fn equation_system(
    state: &GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    cross: &FactorCrossProducts,
    i: usize,
) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
    let (r, k) = (spec.r, spec.design_width());
    let (m, v) = equation_prior(&ctx.tables, &state.hierarchy, &spec.prior, i);
    let active: Vec<usize> = spec.restrictions.active_factor_columns(i, r);
    let na = active.len();
    let d = k + na;
    let s2inv = 1.0 / state.structure.noise_variances[i];

    let mut prec = DMatrix::zeros(d, d);
    let mut linear = DVector::zeros(d);
    for a in 0..k {
        for b in 0..k {
            prec[(a, b)] = s2inv * ctx.xtx[(a, b)];
        }
        prec[(a, a)] += 1.0 / v[a];
        linear[a] = m[a] / v[a] + s2inv * ctx.xty[(a, i)];
    }
    for (pa, &ca) in active.iter().enumerate() {
        for a in 0..k {
            let val = s2inv * cross.xtf[(a, ca)];
            prec[(a, k + pa)] = val;
            prec[(k + pa, a)] = val;
        }
        for (pb, &cb) in active.iter().enumerate() {
            prec[(k + pa, k + pb)] = s2inv * cross.ftf[(ca, cb)];
        }
        prec[(k + pa, k + pa)] += 1.0 / spec.prior.loading_variance;
        linear[k + pa] = s2inv * cross.fty[(ca, i)];
    }
    (prec, linear, active)
}

struct FactorCrossProducts {
    xtf: DMatrix<f64>,
    ftf: DMatrix<f64>,
    fty: DMatrix<f64>,
}

impl FactorCrossProducts {
    fn new(ctx: &SweepCtx, f: &DMatrix<f64>) -> FactorCrossProducts {
        FactorCrossProducts {
            xtf: ctx.x.transpose() * f,
            ftf: f.transpose() * f,
            fty: f.transpose() * ctx.y,
        }
    }
}

/// Conditional mean and covariance of one equation's stacked (design
/// coefficients, active loadings) block, ignoring any sign truncation; the
/// third element lists which factor columns the loading tail covers.
pub fn coefficient_conditional_moments(
    state: &GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    equation: usize,
) -> Result<(DVector<f64>, DMatrix<f64>, Vec<usize>)> {
    if equation >= spec.n {
        return Err(Error::Dimension(format!(
            "equation {equation} out of range for {} variables",
            spec.n
        )));
    }
    let cross = FactorCrossProducts::new(ctx, &state.latent.factors);
    let (prec, linear, active) = equation_system(state, ctx, spec, &cross, equation);
    let chol = prec
        .cholesky()
        .ok_or_else(|| Error::Decomposition { context: "equation precision".into() })?;
    let mean = chol.solve(&linear);
    Ok((mean, chol.inverse(), active))
}

fn step_coefficients(
    state: &mut GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    rng: &mut RngStream,
) -> Result<()> {
    let (n, r, k) = (spec.n, spec.r, spec.design_width());
    let cross = FactorCrossProducts::new(ctx, &state.latent.factors);

    for i in 0..n {
        let (mut prec, linear, active) = equation_system(state, ctx, spec, &cross, i);
        let na = active.len();
        let d = k + na;

        let signs = spec.restrictions.equation_signs(i);
        let draw = if signs.is_empty() {
            let mut rhs = linear;
            let mut zd = DVector::zeros(d);
            sample_block_in_place(&mut prec, &mut rhs, &mut zd, rng)?;
            rhs
        } else {
            let mut coord_signs: BTreeMap<usize, SignConstraint> = BTreeMap::new();
            for (factor, sign) in signs {
                if let Some(pos) = active.iter().position(|&c| c == factor) {
                    coord_signs.insert(k + pos, sign);
                }
            }
            let mut warm = DVector::zeros(d);
            for a in 0..k {
                warm[a] = state.coef.as_matrix()[(i, a)];
            }
            for (pa, &ca) in active.iter().enumerate() {
                warm[k + pa] = state.structure.loadings[(i, ca)];
            }
            sample_constrained_gaussian(&prec, &linear, &coord_signs, &warm, SIGN_GIBBS_SWEEPS, rng)?
        };

        for a in 0..k {
            state.coef.as_matrix_mut()[(i, a)] = draw[a];
        }
        let full = embed(&draw.rows(k, na).into_owned(), &active, r);
        for a in 0..r {
            state.structure.loadings[(i, a)] = full[a];
        }
    }
    Ok(())
}

/// Scale-mixture weights: w | f, v is inverse-gamma period by period.
fn step_weights(state: &mut GibbsState, rng: &mut RngStream) {
    let (t, r) = state.latent.factors.shape();
    for a in 0..r {
        let v = state.latent.dof[a];
        for s in 0..t {
            let fsq = state.latent.factors[(s, a)].powi(2);
            let params = InverseGammaParams::new((v + 1.0) / 2.0, (v + fsq) / 2.0)
                .expect("positive inverse-gamma parameters");
            state.latent.weights[(s, a)] = sample_inverse_gamma(params, rng);
        }
    }
}

/// Tail parameters via griddy inversion of the product of inverse-gamma
/// densities of the weights under a uniform prior.
fn step_dof(
    state: &mut GibbsState,
    spec: &ModelSpec,
    settings: &SamplerSettings,
    rng: &mut RngStream,
) -> Result<()> {
    let (t, r) = state.latent.weights.shape();
    let tt = t as f64;
    for a in 0..r {
        let mut s_ln = 0.0;
        let mut s_inv = 0.0;
        for s in 0..t {
            let w = state.latent.weights[(s, a)];
            s_ln += w.ln();
            s_inv += 1.0 / w;
        }
        let log_density = |v: f64| {
            let al = v / 2.0;
            tt * (al * al.ln() - ln_gamma(al)) - (al + 1.0) * s_ln - al * s_inv
        };
        state.latent.dof[a] = sample_griddy(
            log_density,
            (spec.prior.dof_lower, spec.prior.dof_upper),
            settings.griddy_grid,
            rng,
        )?;
    }
    Ok(())
}

/// Draw an inverse-gamma variance, flooring a degenerate scale.
fn draw_variance(shape: f64, scale: f64, what: &str, rng: &mut RngStream) -> Result<f64> {
    let scale = if scale > 1e-12 {
        scale
    } else {
        log::warn!("{what} variance conditional has degenerate scale {scale}; flooring at 1e-12");
        1e-12
    };
    let params = InverseGammaParams::new(shape, scale)?;
    Ok(sample_inverse_gamma(params, rng).max(1e-12))
}

/// Idiosyncratic variances from the squared residuals after removing both
/// the lag structure and the common factors.
fn step_sigma(
    state: &mut GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    rng: &mut RngStream,
) -> Result<()> {
    let t = ctx.y.nrows();
    let resid = ctx.y
        - state.coef.fitted(ctx.x)
        - &state.latent.factors * state.structure.loadings.transpose();
    for i in 0..spec.n {
        let ss: f64 = (0..t).map(|s| resid[(s, i)].powi(2)).sum();
        state.structure.noise_variances[i] = draw_variance(
            spec.prior.sigma_shape + t as f64 / 2.0,
            spec.prior.sigma_scale + ss / 2.0,
            "idiosyncratic",
            rng,
        )?;
    }
    Ok(())
}

/// Group shrinkage scales, one for own lags and one for cross lags.
fn step_lambda(state: &mut GibbsState, ctx: &SweepCtx, rng: &mut RngStream) {
    for g in [OWN, CROSS] {
        let (count, sum) =
            lambda_group_stats(g, state.coef.as_matrix(), &ctx.tables, &state.hierarchy);
        let params = lambda_conditional(count, state.hierarchy.z_lambda[g], sum);
        state.hierarchy.lambda[g] = sample_inverse_gamma(params, rng);
    }
}

/// Local shrinkage scales, one per lag coefficient.
fn step_psi(state: &mut GibbsState, ctx: &SweepCtx, rng: &mut RngStream) {
    let k = ctx.tables.width();
    for i in 0..ctx.tables.n_vars() {
        let mean = ctx.tables.mean_row(i);
        for j in 1..k {
            let lambda = match ctx.tables.group(i, j) {
                CoefGroup::OwnLag => state.hierarchy.lambda[OWN],
                CoefGroup::CrossLag => state.hierarchy.lambda[CROSS],
                CoefGroup::Intercept => unreachable!(),
            };
            let dev = state.coef.as_matrix()[(i, j)] - mean[j];
            let params = psi_conditional(
                state.hierarchy.z_psi[(i, j - 1)],
                dev * dev,
                lambda,
                ctx.tables.decay(j),
            );
            state.hierarchy.psi[(i, j - 1)] = sample_inverse_gamma(params, rng);
        }
    }
}

fn step_z_lambda(state: &mut GibbsState, rng: &mut RngStream) {
    for g in [OWN, CROSS] {
        let params = z_conditional(state.hierarchy.lambda[g]);
        state.hierarchy.z_lambda[g] = sample_inverse_gamma(params, rng);
    }
}

fn step_z_psi(state: &mut GibbsState, rng: &mut RngStream) {
    for i in 0..state.hierarchy.psi.nrows() {
        for j in 0..state.hierarchy.psi.ncols() {
            let params = z_conditional(state.hierarchy.psi[(i, j)]);
            state.hierarchy.z_psi[(i, j)] = sample_inverse_gamma(params, rng);
        }
    }
}

/// Proxy measurement equation: Gaussian slope, inverse-gamma noise.
fn step_proxy(
    state: &mut GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    rng: &mut RngStream,
) -> Result<()> {
    let (Some(series), Some(proxy_spec)) = (ctx.proxy_series, spec.restrictions.proxy.as_ref())
    else {
        return Ok(());
    };
    let t = series.len();
    let tgt = proxy_spec.target;
    let px = state.proxy.as_mut().expect("proxy state initialized with proxy spec");

    let mut sf2 = 0.0;
    let mut sfm = 0.0;
    for s in 0..t {
        let f = state.latent.factors[(s, tgt)];
        sf2 += f * f;
        sfm += f * series[s];
    }
    let prec = 1.0 / spec.prior.loading_variance + sf2 / px.noise_variance;
    let mean = (sfm / px.noise_variance) / prec;
    let zdraw: f64 = StandardNormal.sample(rng);
    px.slope = mean + zdraw / prec.sqrt();

    let mut ss = 0.0;
    for s in 0..t {
        let e = series[s] - px.slope * state.latent.factors[(s, tgt)];
        ss += e * e;
    }
    px.noise_variance = draw_variance(
        spec.prior.sigma_shape + t as f64 / 2.0,
        spec.prior.sigma_scale + ss / 2.0,
        "proxy",
        rng,
    )?;
    Ok(())
}

/// One full sweep over all conditionals in the fixed scan order.
pub fn sweep(
    state: &mut GibbsState,
    ctx: &SweepCtx,
    spec: &ModelSpec,
    settings: &SamplerSettings,
    rng: &mut RngStream,
) -> Result<()> {
    step_factors(state, ctx, spec, rng)?;
    step_coefficients(state, ctx, spec, rng)?;
    step_weights(state, rng);
    step_dof(state, spec, settings, rng)?;
    step_sigma(state, ctx, spec, rng)?;
    step_lambda(state, ctx, rng);
    step_psi(state, ctx, rng);
    step_z_lambda(state, rng);
    step_z_psi(state, rng);
    step_proxy(state, ctx, spec, rng)?;
    Ok(())
}

/// Retained posterior draws of one chain, stored per parameter block.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub t: usize,
    pub coef: Vec<DMatrix<f64>>,
    pub loadings: Vec<DMatrix<f64>>,
    pub sigma2: Vec<DVector<f64>>,
    pub dof: Vec<DVector<f64>>,
    pub factors: Vec<DMatrix<f64>>,
    pub weights: Vec<DMatrix<f64>>,
    pub lambda: Vec<[f64; 2]>,
    /// Proxy-equation draws; empty when the model has no proxy.
    pub proxy: Vec<ProxyState>,
}

impl PosteriorSample {
    pub fn n_draws(&self) -> usize {
        self.coef.len()
    }

    fn mean_of<T: Clone + std::ops::AddAssign<T> + std::ops::Mul<f64, Output = T>>(
        items: &[T],
    ) -> T {
        let mut acc = items[0].clone() * (1.0 / items.len() as f64);
        for item in &items[1..] {
            acc += item.clone() * (1.0 / items.len() as f64);
        }
        acc
    }

    pub fn mean_coef(&self) -> DMatrix<f64> {
        Self::mean_of(&self.coef)
    }

    pub fn mean_loadings(&self) -> DMatrix<f64> {
        Self::mean_of(&self.loadings)
    }

    pub fn mean_sigma2(&self) -> DVector<f64> {
        Self::mean_of(&self.sigma2)
    }

    pub fn mean_dof(&self) -> DVector<f64> {
        if self.r == 0 {
            return DVector::zeros(0);
        }
        Self::mean_of(&self.dof)
    }

    pub fn loading_trace(&self, i: usize, a: usize) -> Vec<f64> {
        self.loadings.iter().map(|l| l[(i, a)]).collect()
    }

    pub fn coef_trace(&self, i: usize, j: usize) -> Vec<f64> {
        self.coef.iter().map(|b| b[(i, j)]).collect()
    }

    pub fn dof_trace(&self, a: usize) -> Vec<f64> {
        self.dof.iter().map(|v| v[a]).collect()
    }

    pub fn sigma2_trace(&self, i: usize) -> Vec<f64> {
        self.sigma2.iter().map(|s| s[i]).collect()
    }

    /// Quantile of one loading entry across draws.
    pub fn loading_quantile(&self, i: usize, a: usize, prob: f64) -> f64 {
        let mut xs = self.loading_trace(i, a);
        xs.sort_by(|u, v| u.partial_cmp(v).expect("finite draws"));
        stats::quantile(&xs, prob)
    }

    /// Effective sample size of one loading's trace.
    pub fn loading_ess(&self, i: usize, a: usize) -> f64 {
        stats::effective_sample_size(&self.loading_trace(i, a))
    }
}

/// Run one chain on prepared data and collect retained draws. Draws are
/// returned raw, in whatever column order and signs the sampler visited;
/// apply a normalization pass before averaging factor-indexed quantities.
pub fn run_chain(
    spec: &ModelSpec,
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    proxy_series: Option<&DVector<f64>>,
    settings: &SamplerSettings,
) -> Result<PosteriorSample> {
    settings.validate()?;
    spec.prior.validate()?;
    spec.restrictions.validate(spec.n, spec.r)?;
    let ctx = SweepCtx::new(spec, y, x, proxy_series)?;
    let t = y.nrows();
    let mut rng = RngStream::new(settings.seed, settings.stream);
    let mut state = init_state(spec, t, &mut rng)?;

    let keep = settings.retain;
    let mut sample = PosteriorSample {
        n: spec.n,
        p: spec.p,
        r: spec.r,
        t,
        coef: Vec::with_capacity(keep),
        loadings: Vec::with_capacity(keep),
        sigma2: Vec::with_capacity(keep),
        dof: Vec::with_capacity(keep),
        factors: Vec::with_capacity(keep),
        weights: Vec::with_capacity(keep),
        lambda: Vec::with_capacity(keep),
        proxy: Vec::new(),
    };

    let total = settings.burn_in + settings.retain * settings.thin;
    for it in 0..total {
        sweep(&mut state, &ctx, spec, settings, &mut rng)?;
        let keep_now = it >= settings.burn_in
            && (it - settings.burn_in + 1) % settings.thin == 0;
        if keep_now {
            sample.coef.push(state.coef.as_matrix().clone());
            sample.loadings.push(state.structure.loadings.clone());
            sample.sigma2.push(state.structure.noise_variances.clone());
            sample.dof.push(state.latent.dof.clone());
            sample.factors.push(state.latent.factors.clone());
            sample.weights.push(state.latent.weights.clone());
            sample.lambda.push(state.hierarchy.lambda);
            if let Some(px) = state.proxy {
                sample.proxy.push(px);
            }
        }
    }
    Ok(sample)
}

/// Draw a full state from the prior; needs a proper variance prior. Used by
/// the prior-vs-posterior simulator checks.
pub fn prior_draw(spec: &ModelSpec, t: usize, rng: &mut RngStream) -> Result<GibbsState> {
    spec.prior.validate()?;
    if !(spec.prior.sigma_shape > 0.0 && spec.prior.sigma_scale > 0.0) {
        return Err(Error::Config(
            "prior simulation needs a proper variance prior (positive shape and scale)".into(),
        ));
    }
    let (n, p, r) = (spec.n, spec.p, spec.r);
    let tables = MinnesotaTables::new(n, p, &spec.prior);
    let half_cauchy_sq = |rng: &mut RngStream| {
        let z = sample_inverse_gamma(
            InverseGammaParams::new(0.5, 1.0).expect("fixed parameters"),
            rng,
        );
        let x = sample_inverse_gamma(
            InverseGammaParams::new(0.5, 1.0 / z).expect("positive scale"),
            rng,
        );
        (x, z)
    };

    let mut hierarchy = MinnesotaHierarchy::init(n, p);
    for g in [OWN, CROSS] {
        let (x, z) = half_cauchy_sq(rng);
        hierarchy.lambda[g] = x;
        hierarchy.z_lambda[g] = z;
    }
    for i in 0..n {
        for j in 0..n * p {
            let (x, z) = half_cauchy_sq(rng);
            hierarchy.psi[(i, j)] = x;
            hierarchy.z_psi[(i, j)] = z;
        }
    }

    let mut coef = VarCoefficients::zeros(n, p);
    for i in 0..n {
        let (m, v) = equation_prior(&tables, &hierarchy, &spec.prior, i);
        for j in 0..tables.width() {
            let z: f64 = StandardNormal.sample(rng);
            coef.as_matrix_mut()[(i, j)] = m[j] + v[j].sqrt() * z;
        }
    }

    let load_sd = spec.prior.loading_variance.sqrt();
    let mut loadings = DMatrix::zeros(n, r);
    for i in 0..n {
        for a in 0..r {
            let z: f64 = StandardNormal.sample(rng);
            loadings[(i, a)] = load_sd * z;
        }
    }
    for (i, a) in spec.restrictions.zeros() {
        loadings[(i, a)] = 0.0;
    }
    for ((i, a), s) in spec.restrictions.signs() {
        let (lo, hi) = s.bounds();
        loadings[(i, a)] = crate::kernels::sample_truncated_normal(0.0, load_sd, lo, hi, rng)?;
    }

    let sigma_params = InverseGammaParams::new(spec.prior.sigma_shape, spec.prior.sigma_scale)?;
    let noise = DVector::from_fn(n, |_, _| sample_inverse_gamma(sigma_params, rng));

    let dof_dist = Uniform::new(spec.prior.dof_lower, spec.prior.dof_upper);
    let dof = DVector::from_fn(r, |_, _| rng.sample(dof_dist));
    let mut weights = DMatrix::zeros(t, r);
    let mut factors = DMatrix::zeros(t, r);
    for a in 0..r {
        let wp = InverseGammaParams::new(dof[a] / 2.0, dof[a] / 2.0)?;
        for s in 0..t {
            let w = sample_inverse_gamma(wp, rng);
            let z: f64 = StandardNormal.sample(rng);
            weights[(s, a)] = w;
            factors[(s, a)] = w.sqrt() * z;
        }
    }

    let proxy = match &spec.restrictions.proxy {
        Some(_) => {
            let z: f64 = StandardNormal.sample(rng);
            Some(ProxyState {
                slope: load_sd * z,
                noise_variance: sample_inverse_gamma(sigma_params, rng),
            })
        }
        None => None,
    };

    Ok(GibbsState {
        coef,
        structure: FactorStructure::new(loadings, noise)?,
        latent: LatentBlock::new(factors, weights, dof)?,
        hierarchy,
        proxy,
    })
}

/// Simulate observations from the state's parameters and factor paths,
/// recursively from fixed pre-sample rows. Returns the simulated responses
/// and the matching lagged design.
pub fn simulate_observations(
    state: &GibbsState,
    spec: &ModelSpec,
    y_init: &DMatrix<f64>,
    t: usize,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, p, k) = (spec.n, spec.p, spec.design_width());
    if y_init.nrows() != p || y_init.ncols() != n {
        return Err(Error::Dimension(format!(
            "pre-sample block is {}x{}, expected {p}x{n}",
            y_init.nrows(),
            y_init.ncols()
        )));
    }
    if state.latent.factors.nrows() != t {
        return Err(Error::Dimension(format!(
            "state holds {} factor rows, simulation wants {t}",
            state.latent.factors.nrows()
        )));
    }
    let mut ext = DMatrix::zeros(p + t, n);
    ext.view_mut((0, 0), (p, n)).copy_from(y_init);
    let mut x = DMatrix::zeros(t, k);
    let sds: Vec<f64> = state.structure.noise_variances.iter().map(|v| v.sqrt()).collect();
    for s in 0..t {
        x[(s, 0)] = 1.0;
        for j in 1..k {
            let lag = (j - 1) / n + 1;
            let var = (j - 1) % n;
            x[(s, j)] = ext[(p + s - lag, var)];
        }
        for i in 0..n {
            let mut mean = 0.0;
            for j in 0..k {
                mean += state.coef.as_matrix()[(i, j)] * x[(s, j)];
            }
            for a in 0..spec.r {
                mean += state.structure.loadings[(i, a)] * state.latent.factors[(s, a)];
            }
            let z: f64 = StandardNormal.sample(rng);
            ext[(p + s, i)] = mean + sds[i] * z;
        }
    }
    let y = ext.view((p, 0), (t, n)).into_owned();
    Ok((y, x))
}

/// Simulate the proxy series implied by the state's factor path.
pub fn simulate_proxy(
    state: &GibbsState,
    spec: &ModelSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let proxy_spec = spec
        .restrictions
        .proxy
        .as_ref()
        .ok_or_else(|| Error::Config("model has no proxy restriction".into()))?;
    let px = state
        .proxy
        .ok_or_else(|| Error::Config("state carries no proxy parameters".into()))?;
    let t = state.latent.factors.nrows();
    let sd = px.noise_variance.sqrt();
    Ok(DVector::from_fn(t, |s, _| {
        let z: f64 = StandardNormal.sample(rng);
        px.slope * state.latent.factors[(s, proxy_spec.target)] + sd * z
    }))
}
