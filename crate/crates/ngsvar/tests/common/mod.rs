//! Numerical oracles shared by the integration suites: adaptive quadrature
//! on finite and half-infinite intervals, dense Gaussian conditioning, and
//! moment extraction from unnormalized positive kernels. Everything here is
//! brute force on purpose; the library must agree with it, not reuse it.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    // Never let the per-node tolerance chase below machine precision of the
    // local mass, or sharp peaks would refine to the depth cap everywhere.
    let child = (tol / 2.0).max(f64::EPSILON * (left.abs() + right.abs()));
    adaptive(f, a, lm, m, fa, flm, fm, left, child, depth - 1)
        + adaptive(f, m, rm, b, fm, frm, fb, right, child, depth - 1)
}

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, m, b, fa, fm, fb, whole, tol, 30)
}

/// Integral of f over (0, inf) via the substitution x = t / (1 - t); the
/// integrand must decay fast enough that the mapped endpoint vanishes.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    let mapped = move |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let x = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(&mapped, 0.0, 1.0, tol)
}

/// Normalized moment E[x^power] of an unnormalized positive kernel on
/// (0, inf), given its log. The peak is located on a log-spaced grid and
/// factored out so the quadrature never sees an overflowing exponential.
/// The caller must only ask for moments that exist for its kernel.
pub fn kernel_moment(log_kernel: &dyn Fn(f64) -> f64, power: i32) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    for i in 0..4000 {
        let x = 10f64.powf(-8.0 + 16.0 * i as f64 / 3999.0);
        let v = log_kernel(x);
        if v > peak {
            peak = v;
        }
    }
    assert!(peak.is_finite(), "kernel peak not located");
    let base = move |x: f64, p: i32| {
        let v = (log_kernel(x) - peak).exp() * x.powi(p);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mass = integrate_half_line(&|x| base(x, 0), 1e-12);
    assert!(mass > 0.0, "kernel mass vanished");
    integrate_half_line(&|x| base(x, power), 1e-12 * mass.max(1.0)) / mass
}

/// Mean and covariance of the kept coordinates of a joint Gaussian,
/// conditioned on the given coordinates taking the observed values.
pub fn gaussian_condition(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    keep: &[usize],
    given: &[usize],
    observed: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let submatrix = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| cov[(rows[i], cols[j])])
    };
    let c_kk = submatrix(keep, keep);
    let c_kg = submatrix(keep, given);
    let c_gg = submatrix(given, given);
    let chol = c_gg.cholesky().expect("observed block must be positive definite");
    let innov = DVector::from_fn(given.len(), |i, _| observed[i] - mean[given[i]]);
    let solved_innov = chol.solve(&innov);
    let solved_cross = chol.solve(&c_kg.transpose());
    let cond_mean = DVector::from_fn(keep.len(), |i, _| mean[keep[i]]) + &c_kg * solved_innov;
    let cond_cov = c_kk - &c_kg * solved_cross;
    (cond_mean, cond_cov)
}

/// Log density of a zero-mean multivariate normal evaluated densely.
pub fn mvn_logpdf(x: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let chol = cov.clone().cholesky().expect("covariance must be positive definite");
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let solved = chol.solve(x);
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + logdet + x.dot(&solved))
}

/// Unnormalized inverse-gamma log density with shape a and scale b.
pub fn ig_log_kernel(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -(a + 1.0) * x.ln() - b / x
}

/// Normalized inverse-gamma log density.
pub fn ig_logpdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - statrs::function::gamma::ln_gamma(a) + ig_log_kernel(x, a, b)
}
