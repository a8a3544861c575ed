//! Loading restrictions: exact zeros, sign constraints, and an optional
//! proxy equation tied to one factor. Zeros are imposed by dropping the
//! restricted coordinates from the draw; signs by a short coordinate-wise
//! Gibbs scan with truncated-normal conditionals.

use crate::error::{Error, Result};
use crate::kernels::sample_truncated_normal;
use crate::rng::RngStream;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use std::collections::{BTreeMap, BTreeSet};

/// Sign of a restricted loading entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConstraint {
    Positive,
    Negative,
}

impl SignConstraint {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            SignConstraint::Positive => (0.0, f64::INFINITY),
            SignConstraint::Negative => (f64::NEG_INFINITY, 0.0),
        }
    }

    pub fn satisfied_by(self, x: f64) -> bool {
        match self {
            SignConstraint::Positive => x >= 0.0,
            SignConstraint::Negative => x <= 0.0,
        }
    }
}

/// An observed instrument tied to one factor: the proxy series loads on
/// that factor alone, which pins the factor's label and sign.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProxySpec {
    /// Index of the factor the proxy measures.
    pub target: usize,
    /// Name of the proxy series, for reports.
    pub name: String,
}

/// All identification-side restrictions on the loading matrix.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RestrictionSet {
    /// Entries (variable, factor) forced to zero.
    zeros: BTreeSet<(usize, usize)>,
    /// Entries (variable, factor) with a restricted sign.
    signs: BTreeMap<(usize, usize), SignConstraint>,
    pub proxy: Option<ProxySpec>,
}

impl RestrictionSet {
    pub fn add_zero(&mut self, variable: usize, factor: usize) -> &mut Self {
        self.zeros.insert((variable, factor));
        self
    }

    pub fn add_sign(&mut self, variable: usize, factor: usize, sign: SignConstraint) -> &mut Self {
        self.signs.insert((variable, factor), sign);
        self
    }

    pub fn with_proxy(mut self, proxy: ProxySpec) -> Self {
        self.proxy = Some(proxy);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty() && self.signs.is_empty() && self.proxy.is_none()
    }

    pub fn zeros(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.zeros.iter().copied()
    }

    pub fn signs(&self) -> impl Iterator<Item = ((usize, usize), SignConstraint)> + '_ {
        self.signs.iter().map(|(&k, &v)| (k, v))
    }

    pub fn validate(&self, n: usize, r: usize) -> Result<()> {
        for &(v, f) in &self.zeros {
            if v >= n || f >= r {
                return Err(Error::Config(format!(
                    "zero restriction on loading ({v}, {f}) is outside the {n}x{r} matrix"
                )));
            }
        }
        for (&(v, f), _) in &self.signs {
            if v >= n || f >= r {
                return Err(Error::Config(format!(
                    "sign restriction on loading ({v}, {f}) is outside the {n}x{r} matrix"
                )));
            }
            if self.zeros.contains(&(v, f)) {
                return Err(Error::Config(format!(
                    "loading ({v}, {f}) is restricted to zero and to a sign"
                )));
            }
        }
        if let Some(proxy) = &self.proxy {
            if proxy.target >= r {
                return Err(Error::Config(format!(
                    "proxy targets factor {} but the model has {r} factors",
                    proxy.target
                )));
            }
        }
        // A factor with every loading forced to zero cannot be sampled.
        for f in 0..r {
            if n > 0 && (0..n).all(|v| self.zeros.contains(&(v, f))) {
                return Err(Error::Config(format!("factor {f} has all loadings forced to zero")));
            }
        }
        Ok(())
    }

    /// Factor columns of one equation that stay in the regression after
    /// zero restrictions are removed.
    pub fn active_factor_columns(&self, variable: usize, r: usize) -> Vec<usize> {
        (0..r).filter(|&f| !self.zeros.contains(&(variable, f))).collect()
    }

    /// Sign constraints of one equation, keyed by factor index.
    pub fn equation_signs(&self, variable: usize) -> BTreeMap<usize, SignConstraint> {
        self.signs
            .iter()
            .filter(|((v, _), _)| *v == variable)
            .map(|(&(_, f), &s)| (f, s))
            .collect()
    }

    pub fn constrains_equation(&self, variable: usize) -> bool {
        self.zeros.iter().any(|&(v, _)| v == variable)
            || self.signs.keys().any(|&(v, _)| v == variable)
    }
}

/// Scatter a reduced vector back into full length, zeros elsewhere.
pub fn embed(reduced: &DVector<f64>, kept: &[usize], full_len: usize) -> DVector<f64> {
    let mut out = DVector::zeros(full_len);
    for (pos, &j) in kept.iter().enumerate() {
        out[j] = reduced[pos];
    }
    out
}

/// Number of coordinate-Gibbs passes used for sign-constrained draws.
pub const SIGN_GIBBS_SWEEPS: usize = 10;

/// Draw from N(mean, K^-1) restricted to the half-spaces in `signs`, where
/// K mean = linear. Without sign constraints this is one exact joint draw;
/// with them, a coordinate Gibbs scan whose conditionals are truncated
/// normals, warm-started from the previous value of the coordinates.
pub fn sample_constrained_gaussian(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    signs: &BTreeMap<usize, SignConstraint>,
    warm: &DVector<f64>,
    sweeps: usize,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let d = precision.nrows();
    if precision.ncols() != d || linear.len() != d || warm.len() != d {
        return Err(Error::Dimension("constrained draw inputs disagree on dimension".into()));
    }
    let chol = nalgebra::Cholesky::new(precision.clone())
        .ok_or(Error::Decomposition { context: "constrained draw precision".into() })?;
    let mean = chol.solve(linear);

    if signs.is_empty() {
        let z = DVector::from_fn(d, |_, _| {
            let x: f64 = StandardNormal.sample(rng);
            x
        });
        let l = chol.l();
        let mut draw = z;
        l.transpose().solve_upper_triangular_mut(&mut draw);
        return Ok(mean + draw);
    }
    for &j in signs.keys() {
        if j >= d {
            return Err(Error::Dimension(format!(
                "sign constraint on coordinate {j} of a {d}-dimensional draw"
            )));
        }
    }

    let mut x = warm.clone();
    for (&j, &s) in signs {
        if !s.satisfied_by(x[j]) {
            x[j] = -x[j];
        }
        if x[j] == 0.0 {
            x[j] = match s {
                SignConstraint::Positive => 1e-8,
                SignConstraint::Negative => -1e-8,
            };
        }
    }
    for _ in 0..sweeps.max(1) {
        for j in 0..d {
            // x_j | rest is normal with precision K_jj centered at
            // mu_j - sum_{l != j} K_jl (x_l - mu_l) / K_jj.
            let kjj = precision[(j, j)];
            let mut cross = 0.0;
            for l in 0..d {
                if l != j {
                    cross += precision[(j, l)] * (x[l] - mean[l]);
                }
            }
            let cmean = mean[j] - cross / kjj;
            let csd = 1.0 / kjj.sqrt();
            x[j] = match signs.get(&j) {
                Some(&s) => {
                    let (lo, hi) = s.bounds();
                    sample_truncated_normal(cmean, csd, lo, hi, rng)?
                }
                None => {
                    let z: f64 = StandardNormal.sample(rng);
                    cmean + csd * z
                }
            };
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn validation_catches_conflicts_and_ranges() {
        let mut set = RestrictionSet::default();
        set.add_zero(0, 0).add_sign(1, 0, SignConstraint::Positive);
        assert!(set.validate(2, 1).is_ok());
        assert!(set.validate(1, 1).is_err());
        set.add_sign(0, 0, SignConstraint::Negative);
        assert!(set.validate(2, 1).is_err());

        let mut dead = RestrictionSet::default();
        dead.add_zero(0, 0).add_zero(1, 0);
        assert!(dead.validate(2, 1).is_err());

        let proxied = RestrictionSet::default()
            .with_proxy(ProxySpec { target: 2, name: "m".into() });
        assert!(proxied.validate(3, 2).is_err());
        let ok = RestrictionSet::default().with_proxy(ProxySpec { target: 1, name: "m".into() });
        assert!(ok.validate(3, 2).is_ok());
    }

    #[test]
    fn active_columns_drop_zeros() {
        let mut set = RestrictionSet::default();
        set.add_zero(0, 1);
        assert_eq!(set.active_factor_columns(0, 3), vec![0, 2]);
        assert_eq!(set.active_factor_columns(1, 3), vec![0, 1, 2]);
        assert!(set.constrains_equation(0));
        assert!(!set.constrains_equation(1));
    }

    #[test]
    fn embed_scatters() {
        let reduced = DVector::from_vec(vec![1.0, 2.0]);
        let full = embed(&reduced, &[0, 2], 4);
        assert_eq!(full.as_slice(), &[1.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn unconstrained_draw_matches_moments() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, -0.5, -0.5, 1.0]);
        let mean = DVector::from_vec(vec![1.0, -1.0]);
        let linear = &k * &mean;
        let mut rng = RngStream::new(11, 0);
        let signs = BTreeMap::new();
        let warm = DVector::zeros(2);
        let n = 40_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let x = sample_constrained_gaussian(&k, &linear, &signs, &warm, 1, &mut rng).unwrap();
            sums[0] += x[0];
            sums[1] += x[1];
        }
        assert!((sums[0] / n as f64 - 1.0).abs() < 0.02);
        assert!((sums[1] / n as f64 + 1.0).abs() < 0.02);
    }

    #[test]
    fn sign_constrained_moments_match_rejection_oracle() {
        // Covariance [[1, .6], [.6, 1]], mean (0.3, -0.2), both coordinates
        // restricted positive. The oracle keeps unconstrained draws that
        // happen to satisfy the constraint.
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let k = cov.clone().try_inverse().unwrap();
        let mean = DVector::from_vec(vec![0.3, -0.2]);
        let linear = &k * &mean;
        let mut signs = BTreeMap::new();
        signs.insert(0, SignConstraint::Positive);
        signs.insert(1, SignConstraint::Positive);

        let mut rng = RngStream::new(7, 0);
        let reps = 20_000;
        let mut warm = DVector::from_vec(vec![0.5, 0.5]);
        let mut xs = Vec::with_capacity(reps);
        let mut ys = Vec::with_capacity(reps);
        for _ in 0..reps {
            let d = sample_constrained_gaussian(&k, &linear, &signs, &warm, 3, &mut rng).unwrap();
            xs.push(d[0]);
            ys.push(d[1]);
            warm = d;
        }
        assert!(xs.iter().all(|&v| v >= 0.0));
        assert!(ys.iter().all(|&v| v >= 0.0));

        // Rejection oracle via the Cholesky factor of the covariance.
        let l = nalgebra::Cholesky::new(cov).unwrap().l().clone_owned();
        let mut orng = RngStream::new(8, 0);
        let mut ox = Vec::new();
        let mut oy = Vec::new();
        while ox.len() < 60_000 {
            let z = DVector::from_fn(2, |_, _| {
                let v: f64 = StandardNormal.sample(&mut orng);
                v
            });
            let d = &mean + &l * z;
            if d[0] >= 0.0 && d[1] >= 0.0 {
                ox.push(d[0]);
                oy.push(d[1]);
            }
        }
        assert!((stats::mean(&xs) - stats::mean(&ox)).abs() < 0.025);
        assert!((stats::mean(&ys) - stats::mean(&oy)).abs() < 0.025);
        assert!((stats::sample_variance(&xs) - stats::sample_variance(&ox)).abs() < 0.03);
    }

    #[test]
    fn single_negative_coordinate() {
        let k = DMatrix::from_row_slice(1, 1, &[4.0]);
        let linear = DVector::from_vec(vec![2.0]); // mean 0.5, sd 0.5
        let mut signs = BTreeMap::new();
        signs.insert(0, SignConstraint::Negative);
        let mut rng = RngStream::new(42, 0);
        let warm = DVector::from_vec(vec![-0.1]);
        for _ in 0..200 {
            let d = sample_constrained_gaussian(&k, &linear, &signs, &warm, 2, &mut rng).unwrap();
            assert!(d[0] <= 0.0);
        }
    }
}
