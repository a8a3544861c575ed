//! Shrinkage prior for the VAR coefficients: a Minnesota-style mean and
//! lag-decay table combined with a local-global scale hierarchy. Every
//! lag coefficient q has prior variance lambda_g * psi_q * c_q where
//! lambda_g is shared by its group (own lag or cross lag), psi_q is a
//! per-coefficient local scale, and c_q is a fixed lag-decay constant.
//! Square roots of lambda and psi follow standard half-Cauchy laws via
//! the usual inverse-gamma mixture, which keeps every update conjugate.

use crate::error::{Error, Result};
use crate::kernels::InverseGammaParams;
use nalgebra::{DMatrix, DVector};

/// How the fixed lag-decay constant c depends on the lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagDecay {
    /// c = 1 / lag^2, tighter at longer lags.
    PerLag,
    /// c = 1 / p^2 at every lag, a single flat constant.
    Constant,
}

/// Fixed hyperparameters; everything else about the prior is learned.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorHyperparams {
    pub intercept_variance: f64,
    pub loading_variance: f64,
    /// Prior mean on the first own lag; 1 encodes a random-walk center.
    pub own_lag_mean: f64,
    /// Shape and scale of the inverse-gamma prior on the idiosyncratic
    /// variances; (0, 0) is the improper limit.
    pub sigma_shape: f64,
    pub sigma_scale: f64,
    pub lag_decay: LagDecay,
    /// Support of the uniform prior on each factor's tail parameter.
    pub dof_lower: f64,
    pub dof_upper: f64,
}

impl Default for PriorHyperparams {
    fn default() -> Self {
        PriorHyperparams {
            intercept_variance: 10.0,
            loading_variance: 10.0,
            own_lag_mean: 1.0,
            sigma_shape: 0.0,
            sigma_scale: 0.0,
            lag_decay: LagDecay::PerLag,
            dof_lower: 2.0,
            dof_upper: 30.0,
        }
    }
}

impl PriorHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.intercept_variance > 0.0 && self.intercept_variance.is_finite()) {
            return Err(Error::Config("intercept variance must be positive".into()));
        }
        if !(self.loading_variance > 0.0 && self.loading_variance.is_finite()) {
            return Err(Error::Config("loading variance must be positive".into()));
        }
        if !self.own_lag_mean.is_finite() {
            return Err(Error::Config("own-lag prior mean must be finite".into()));
        }
        if self.sigma_shape < 0.0 || self.sigma_scale < 0.0 {
            return Err(Error::Config("variance prior shape and scale cannot be negative".into()));
        }
        if !(self.dof_lower >= 2.0 && self.dof_upper > self.dof_lower && self.dof_upper.is_finite())
        {
            return Err(Error::Config(format!(
                "tail parameter bounds ({}, {}) must satisfy 2 <= lower < upper",
                self.dof_lower, self.dof_upper
            )));
        }
        Ok(())
    }
}

/// Which prior group a design column belongs to for a given equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefGroup {
    Intercept,
    OwnLag,
    CrossLag,
}

/// Index of lambda's group slot; intercepts never touch lambda.
pub const OWN: usize = 0;
pub const CROSS: usize = 1;

/// Deterministic part of the prior, shared by every sweep: means and
/// lag-decay constants laid out like the design matrix.
#[derive(Debug, Clone)]
pub struct MinnesotaTables {
    n: usize,
    p: usize,
    /// Prior mean per (equation, design column).
    mean: DMatrix<f64>,
    /// Lag-decay constant per design column; entry 0 is unused.
    decay: DVector<f64>,
}

impl MinnesotaTables {
    pub fn new(n: usize, p: usize, prior: &PriorHyperparams) -> Self {
        let k = 1 + n * p;
        let mut mean = DMatrix::zeros(n, k);
        if p >= 1 {
            for i in 0..n {
                mean[(i, 1 + i)] = prior.own_lag_mean;
            }
        }
        let mut decay = DVector::from_element(k, 1.0);
        for j in 1..k {
            let lag = ((j - 1) / n + 1) as f64;
            decay[j] = match prior.lag_decay {
                LagDecay::PerLag => 1.0 / (lag * lag),
                LagDecay::Constant => 1.0 / ((p * p) as f64),
            };
        }
        MinnesotaTables { n, p, mean, decay }
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn lags(&self) -> usize {
        self.p
    }

    pub fn width(&self) -> usize {
        1 + self.n * self.p
    }

    pub fn mean_row(&self, equation: usize) -> DVector<f64> {
        self.mean.row(equation).transpose()
    }

    pub fn decay(&self, column: usize) -> f64 {
        self.decay[column]
    }

    /// Group of design column j in the given equation.
    pub fn group(&self, equation: usize, column: usize) -> CoefGroup {
        if column == 0 {
            CoefGroup::Intercept
        } else if (column - 1) % self.n == equation {
            CoefGroup::OwnLag
        } else {
            CoefGroup::CrossLag
        }
    }
}

/// Learned scales of the hierarchy, one state per chain. Local scales are
/// stored per (equation, lag coefficient), aligned with design columns
/// 1..k via an offset of one.
#[derive(Debug, Clone)]
pub struct MinnesotaHierarchy {
    pub lambda: [f64; 2],
    pub z_lambda: [f64; 2],
    pub psi: DMatrix<f64>,
    pub z_psi: DMatrix<f64>,
}

impl MinnesotaHierarchy {
    pub fn init(n: usize, p: usize) -> Self {
        MinnesotaHierarchy {
            lambda: [1.0; 2],
            z_lambda: [1.0; 2],
            psi: DMatrix::from_element(n, n * p, 1.0),
            z_psi: DMatrix::from_element(n, n * p, 1.0),
        }
    }

    pub fn psi_at(&self, equation: usize, column: usize) -> f64 {
        self.psi[(equation, column - 1)]
    }
}

/// Prior mean and variance for one equation's coefficient vector under the
/// current hierarchy state.
pub fn equation_prior(
    tables: &MinnesotaTables,
    hierarchy: &MinnesotaHierarchy,
    prior: &PriorHyperparams,
    equation: usize,
) -> (DVector<f64>, DVector<f64>) {
    let k = tables.width();
    let mean = tables.mean_row(equation);
    let mut variance = DVector::zeros(k);
    variance[0] = prior.intercept_variance;
    for j in 1..k {
        let lambda = match tables.group(equation, j) {
            CoefGroup::OwnLag => hierarchy.lambda[OWN],
            CoefGroup::CrossLag => hierarchy.lambda[CROSS],
            CoefGroup::Intercept => unreachable!(),
        };
        variance[j] = lambda * hierarchy.psi_at(equation, j) * tables.decay(j);
    }
    (mean, variance)
}

/// Conditional for a local scale given its coefficient: with a half-Cauchy
/// mixture the update is IG(1, 1/z + dev^2 / (2 lambda c)).
pub fn psi_conditional(z: f64, deviation_sq: f64, lambda: f64, decay: f64) -> InverseGammaParams {
    InverseGammaParams::new(1.0, 1.0 / z + deviation_sq / (2.0 * lambda * decay))
        .expect("positive scale")
}

/// Conditional for a group scale given all its coefficients: shape grows by
/// one half per coefficient, the scale collects dev^2 / (2 psi c).
pub fn lambda_conditional(count: usize, z: f64, weighted_dev_sq: f64) -> InverseGammaParams {
    InverseGammaParams::new((count as f64 + 1.0) / 2.0, 1.0 / z + weighted_dev_sq / 2.0)
        .expect("positive scale")
}

/// Conditional for an auxiliary mixture variable given its scale.
pub fn z_conditional(scale: f64) -> InverseGammaParams {
    InverseGammaParams::new(1.0, 1.0 + 1.0 / scale).expect("positive scale")
}

/// Conditional for an idiosyncratic variance given the squared residuals.
pub fn sigma_conditional(
    prior: &PriorHyperparams,
    t: usize,
    sum_sq_resid: f64,
) -> Result<InverseGammaParams> {
    let shape = prior.sigma_shape + t as f64 / 2.0;
    let scale = prior.sigma_scale + sum_sq_resid / 2.0;
    if !(shape > 0.0 && scale > 0.0) {
        return Err(Error::Domain(format!(
            "degenerate variance conditional: shape {shape}, scale {scale}"
        )));
    }
    InverseGammaParams::new(shape, scale)
}

/// Count and the psi/decay-weighted squared deviations of one lambda group,
/// pooled across equations; feeds `lambda_conditional`.
pub fn lambda_group_stats(
    group: usize,
    coef: &DMatrix<f64>,
    tables: &MinnesotaTables,
    hierarchy: &MinnesotaHierarchy,
) -> (usize, f64) {
    let want = if group == OWN { CoefGroup::OwnLag } else { CoefGroup::CrossLag };
    let mut count = 0usize;
    let mut sum = 0.0;
    for i in 0..tables.n_vars() {
        for j in 1..tables.width() {
            if tables.group(i, j) == want {
                count += 1;
                let dev = coef[(i, j)] - tables.mean_row(i)[j];
                sum += dev * dev / (hierarchy.psi_at(i, j) * tables.decay(j));
            }
        }
    }
    (count, sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_center_first_own_lag() {
        let prior = PriorHyperparams::default();
        let tables = MinnesotaTables::new(3, 2, &prior);
        assert_eq!(tables.width(), 7);
        for i in 0..3 {
            for j in 0..7 {
                let expect = if j == 1 + i { 1.0 } else { 0.0 };
                assert_eq!(tables.mean_row(i)[j], expect, "equation {i} column {j}");
            }
        }
    }

    #[test]
    fn decay_falls_with_lag() {
        let prior = PriorHyperparams::default();
        let tables = MinnesotaTables::new(2, 3, &prior);
        assert_eq!(tables.decay(1), 1.0);
        assert_eq!(tables.decay(2), 1.0);
        assert_eq!(tables.decay(3), 0.25);
        assert_eq!(tables.decay(5), 1.0 / 9.0);

        let flat = PriorHyperparams { lag_decay: LagDecay::Constant, ..prior };
        let tables = MinnesotaTables::new(2, 3, &flat);
        for j in 1..tables.width() {
            assert_eq!(tables.decay(j), 1.0 / 9.0);
        }
    }

    #[test]
    fn group_classification() {
        let prior = PriorHyperparams::default();
        let tables = MinnesotaTables::new(2, 2, &prior);
        assert_eq!(tables.group(0, 0), CoefGroup::Intercept);
        assert_eq!(tables.group(0, 1), CoefGroup::OwnLag);
        assert_eq!(tables.group(0, 2), CoefGroup::CrossLag);
        assert_eq!(tables.group(1, 2), CoefGroup::OwnLag);
        assert_eq!(tables.group(1, 3), CoefGroup::CrossLag);
        assert_eq!(tables.group(1, 4), CoefGroup::OwnLag);
    }

    #[test]
    fn equation_prior_assembles_scales() {
        let prior = PriorHyperparams::default();
        let tables = MinnesotaTables::new(2, 2, &prior);
        let mut h = MinnesotaHierarchy::init(2, 2);
        h.lambda = [2.0, 3.0];
        h.psi[(0, 0)] = 0.5; // equation 0, design column 1 (own lag 1)
        h.psi[(0, 1)] = 4.0; // equation 0, design column 2 (cross lag 1)
        let (mean, var) = equation_prior(&tables, &h, &prior, 0);
        assert_eq!(mean[1], 1.0);
        assert_eq!(var[0], 10.0);
        assert!((var[1] - 2.0 * 0.5).abs() < 1e-15);
        assert!((var[2] - 3.0 * 4.0).abs() < 1e-15);
        // Lag-2 own coefficient: lambda_own * psi * 1/4.
        assert!((var[3] - 2.0 * 1.0 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn conditional_parameters_match_algebra() {
        let p = psi_conditional(2.0, 0.9, 3.0, 0.25);
        assert_eq!(p.shape, 1.0);
        assert!((p.scale - (0.5 + 0.9 / 1.5)).abs() < 1e-15);

        let l = lambda_conditional(6, 0.5, 1.2);
        assert_eq!(l.shape, 3.5);
        assert!((l.scale - 2.6).abs() < 1e-15);

        let z = z_conditional(0.25);
        assert_eq!(z.shape, 1.0);
        assert_eq!(z.scale, 5.0);
    }

    #[test]
    fn sigma_conditional_handles_improper_prior() {
        let prior = PriorHyperparams::default();
        let c = sigma_conditional(&prior, 10, 3.0).unwrap();
        assert_eq!(c.shape, 5.0);
        assert_eq!(c.scale, 1.5);
        // Improper prior with no data stays degenerate.
        assert!(sigma_conditional(&prior, 0, 0.0).is_err());
    }

    #[test]
    fn lambda_group_stats_pool_across_equations() {
        let prior = PriorHyperparams::default();
        let tables = MinnesotaTables::new(2, 1, &prior);
        let h = MinnesotaHierarchy::init(2, 1);
        // Coefficients equal to the prior mean contribute nothing.
        let mut coef = DMatrix::zeros(2, 3);
        coef[(0, 1)] = 1.0;
        coef[(1, 2)] = 1.0;
        let (count, sum) = lambda_group_stats(OWN, &coef, &tables, &h);
        assert_eq!(count, 2);
        assert!(sum.abs() < 1e-15);
        // A unit deviation on one cross coefficient with psi = c = 1.
        coef[(0, 2)] = 1.0;
        let (count, sum) = lambda_group_stats(CROSS, &coef, &tables, &h);
        assert_eq!(count, 2);
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperparameter_validation() {
        let mut prior = PriorHyperparams::default();
        assert!(prior.validate().is_ok());
        prior.dof_lower = 1.0;
        assert!(prior.validate().is_err());
        prior.dof_lower = 2.0;
        prior.intercept_variance = 0.0;
        assert!(prior.validate().is_err());
    }
}
