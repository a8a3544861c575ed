use crate::error::{Error, Result};
use rand::Rng;

/// Griddy-Gibbs draw from a univariate density known up to a constant on a
/// bounded interval.
///
/// Evaluates the log density on an equally spaced grid, normalizes by the
/// maximum, and inverts the discrete CDF at a uniform draw, returning the
/// smallest grid point whose cumulative weight reaches it. The draw is
/// supported on the grid points themselves.
pub fn sample_griddy<F, R>(
    log_density: F,
    bounds: (f64, f64),
    grid_size: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let (a, b) = bounds;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!("griddy bounds must be finite with a < b, got ({a}, {b})")));
    }
    if grid_size < 2 {
        return Err(Error::Domain(format!("griddy grid size must be at least 2, got {grid_size}")));
    }

    let step = (b - a) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| a + step * i as f64).collect();
    let logf: Vec<f64> = grid.iter().map(|&v| log_density(v)).collect();
    if logf.iter().any(|x| x.is_nan()) {
        return Err(Error::DegenerateDensity("griddy log density returned NaN".into()));
    }
    let max = logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateDensity(
            "griddy log density is -inf on the whole grid".into(),
        ));
    }

    let mut total = 0.0;
    let mut cum = Vec::with_capacity(grid_size);
    for &lf in &logf {
        total += (lf - max).exp();
        cum.push(total);
    }
    let u = rng.gen::<f64>() * total;
    let idx = cum.iter().position(|&c| c >= u).unwrap_or(grid_size - 1);
    Ok(grid[idx])
}
