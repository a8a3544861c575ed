//! Data containers and the reduced-form model: multivariate time series,
//! lagged design construction, VAR coefficient layout, and the factor
//! decomposition of the innovations.

use crate::error::{Error, Result};
use crate::priors::PriorHyperparams;
use crate::restrict::RestrictionSet;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::path::Path;

/// Column transform applied before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    None,
    /// 100 times the natural log, the usual scaling for level series.
    Log100,
}

/// Multivariate time series: rows are time, columns are named variables.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    values: DMatrix<f64>,
    dates: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::Domain("empty variable name".into()));
            }
            if !seen.insert(n.clone()) {
                return Err(Error::Domain(format!("duplicate variable name {n:?}")));
            }
        }
        for j in 0..values.ncols() {
            for t in 0..values.nrows() {
                if !values[(t, j)].is_finite() {
                    return Err(Error::Domain(format!(
                        "non-finite value in column {:?} at row {t}",
                        names[j]
                    )));
                }
            }
        }
        Ok(Dataset { names, values, dates: None })
    }

    pub fn with_dates(mut self, dates: Vec<String>) -> Result<Self> {
        if dates.len() != self.values.nrows() {
            return Err(Error::Dimension(format!(
                "{} dates for {} rows",
                dates.len(),
                self.values.nrows()
            )));
        }
        self.dates = Some(dates);
        Ok(self)
    }

    /// Read a CSV with a header row; a leading column named `date` (any
    /// case) is kept as row labels, every other column must be numeric.
    pub fn from_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::Config(format!("cannot open {}", path.as_ref().display()))
            }
            _ => Error::Csv(e),
        })?;
        let headers: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if headers.is_empty() {
            return Err(Error::Domain("CSV has no columns".into()));
        }
        let date_col = headers.first().filter(|h| h.eq_ignore_ascii_case("date")).map(|_| 0usize);
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != date_col)
            .map(|(_, h)| h.clone())
            .collect();

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut dates: Vec<String> = Vec::new();
        for (ridx, record) in reader.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(names.len());
            for (i, field) in record.iter().enumerate() {
                if Some(i) == date_col {
                    dates.push(field.trim().to_string());
                    continue;
                }
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Domain(format!(
                        "row {} column {:?}: cannot parse {field:?} as a number",
                        ridx + 2,
                        headers[i]
                    ))
                })?;
                row.push(v);
            }
            if row.len() != names.len() {
                return Err(Error::Dimension(format!(
                    "row {} has {} fields, expected {}",
                    ridx + 2,
                    record.len(),
                    headers.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::SampleSize("CSV contains no data rows".into()));
        }
        let values =
            DMatrix::from_fn(rows.len(), names.len(), |t, j| rows[t][j]);
        let data = Dataset::new(values, names)?;
        if date_col.is_some() {
            data.with_dates(dates)
        } else {
            Ok(data)
        }
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("no variable named {name:?}")))
    }

    /// Apply per-column transforms; unknown names in the map are an error.
    pub fn apply_transforms(&mut self, transforms: &BTreeMap<String, Transform>) -> Result<()> {
        for name in transforms.keys() {
            self.index_of(name)?;
        }
        for (j, name) in self.names.iter().enumerate() {
            match transforms.get(name) {
                None | Some(Transform::None) => {}
                Some(Transform::Log100) => {
                    for t in 0..self.values.nrows() {
                        let v = self.values[(t, j)];
                        if v <= 0.0 {
                            return Err(Error::Domain(format!(
                                "log transform of non-positive value {v} in column {name:?}"
                            )));
                        }
                        self.values[(t, j)] = 100.0 * v.ln();
                    }
                }
            }
        }
        Ok(())
    }

    /// Remove a column, returning its values; used to split off a proxy.
    pub fn take_column(&mut self, name: &str) -> Result<Vec<f64>> {
        let j = self.index_of(name)?;
        let col: Vec<f64> = (0..self.values.nrows()).map(|t| self.values[(t, j)]).collect();
        self.names.remove(j);
        self.values = self.values.clone().remove_column(j);
        Ok(col)
    }
}

/// Per-column location and scale recorded by standardization, used to map
/// results back to the original units.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ScaleInfo {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl ScaleInfo {
    pub fn identity(n: usize) -> Self {
        ScaleInfo { means: vec![0.0; n], sds: vec![1.0; n] }
    }
}

/// Standardize every column to mean zero, standard deviation one, using
/// moments from the given row range (end exclusive).
fn standardize_rows(data: &Dataset, from: usize) -> Result<(Dataset, ScaleInfo)> {
    let t = data.n_obs();
    if from >= t {
        return Err(Error::SampleSize(format!("no rows left after dropping the first {from}")));
    }
    let used = (t - from) as f64;
    let mut means = Vec::with_capacity(data.n_vars());
    let mut sds = Vec::with_capacity(data.n_vars());
    let mut values = data.values.clone();
    for j in 0..data.n_vars() {
        let m: f64 = (from..t).map(|i| data.values[(i, j)]).sum::<f64>() / used;
        let v: f64 = (from..t).map(|i| (data.values[(i, j)] - m).powi(2)).sum::<f64>()
            / (used - 1.0).max(1.0);
        let s = v.sqrt();
        if !(s > 1e-12) {
            return Err(Error::DegenerateColumn(data.names[j].clone()));
        }
        for i in 0..t {
            values[(i, j)] = (values[(i, j)] - m) / s;
        }
        means.push(m);
        sds.push(s);
    }
    let mut out = Dataset::new(values, data.names.clone())?;
    out.dates = data.dates.clone();
    Ok((out, ScaleInfo { means, sds }))
}

/// Standardize using full-sample moments.
pub fn standardize(data: &Dataset) -> Result<(Dataset, ScaleInfo)> {
    standardize_rows(data, 0)
}

/// Regression layout for a VAR(p): response rows y_t and design rows
/// x_t = (1, y_{t-1}', ..., y_{t-p}') for t = p .. T-1. The design width is
/// k = 1 + n p; lag-1 variables come first, then lag 2, and so on.
pub fn build_design(data: &Dataset, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let t_raw = data.n_obs();
    let n = data.n_vars();
    if t_raw <= p {
        return Err(Error::SampleSize(format!(
            "need more than {p} observations for {p} lags, got {t_raw}"
        )));
    }
    let t = t_raw - p;
    let k = 1 + n * p;
    let y = DMatrix::from_fn(t, n, |i, j| data.values[(p + i, j)]);
    let x = DMatrix::from_fn(t, k, |i, j| {
        if j == 0 {
            1.0
        } else {
            let lag = (j - 1) / n + 1;
            let var = (j - 1) % n;
            data.values[(p + i - lag, var)]
        }
    });
    Ok((y, x))
}

/// Estimation-ready arrays: trimmed response, design, and the scale applied.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub scale: ScaleInfo,
    pub names: Vec<String>,
    /// Dates aligned with the rows of `y`.
    pub dates: Option<Vec<String>>,
}

/// Trim-aware preparation: when standardizing, moments come from the rows
/// that survive the lag trim, the transform is applied to the whole series,
/// and the design is rebuilt from the transformed series.
pub fn prepare(data: &Dataset, p: usize, standardize_data: bool) -> Result<PreparedData> {
    let (used, scale) = if standardize_data {
        standardize_rows(data, p)?
    } else {
        (data.clone(), ScaleInfo::identity(data.n_vars()))
    };
    let (y, x) = build_design(&used, p)?;
    let dates = used.dates.as_ref().map(|d| d[p..].to_vec());
    Ok(PreparedData { y, x, scale, names: used.names.clone(), dates })
}

/// VAR coefficients stored per equation: row i holds equation i's intercept
/// followed by the lag blocks, matching the design layout of `build_design`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarCoefficients {
    matrix: DMatrix<f64>,
    n: usize,
    p: usize,
}

impl VarCoefficients {
    pub fn zeros(n: usize, p: usize) -> Self {
        VarCoefficients { matrix: DMatrix::zeros(n, 1 + n * p), n, p }
    }

    pub fn from_matrix(matrix: DMatrix<f64>, p: usize) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != 1 + n * p {
            return Err(Error::Dimension(format!(
                "coefficient matrix is {}x{}, expected {}x{} for {p} lags",
                matrix.nrows(),
                matrix.ncols(),
                n,
                1 + n * p
            )));
        }
        Ok(VarCoefficients { matrix, n, p })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn lags(&self) -> usize {
        self.p
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn as_matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.matrix
    }

    pub fn intercepts(&self) -> DVector<f64> {
        self.matrix.column(0).into_owned()
    }

    /// Lag matrix B_l with entry (i, j) multiplying variable j at lag l in
    /// equation i; l is 1-based.
    pub fn lag_matrix(&self, l: usize) -> DMatrix<f64> {
        assert!(l >= 1 && l <= self.p, "lag {l} out of range 1..={}", self.p);
        DMatrix::from_fn(self.n, self.n, |i, j| self.matrix[(i, 1 + (l - 1) * self.n + j)])
    }

    /// Fitted values X B' for a design with matching width.
    pub fn fitted(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * self.matrix.transpose()
    }

    /// Companion-form eigenvalue moduli; empty when p = 0.
    pub fn companion_moduli(&self) -> Vec<f64> {
        if self.p == 0 {
            return Vec::new();
        }
        let np = self.n * self.p;
        let mut comp = DMatrix::zeros(np, np);
        for l in 1..=self.p {
            comp.view_mut((0, (l - 1) * self.n), (self.n, self.n))
                .copy_from(&self.lag_matrix(l));
        }
        for i in self.n..np {
            comp[(i, i - self.n)] = 1.0;
        }
        let mut moduli: Vec<f64> =
            comp.complex_eigenvalues().iter().map(|c| c.norm()).collect();
        moduli.sort_by(|a, b| b.partial_cmp(a).expect("finite moduli"));
        moduli
    }
}

/// Factor decomposition of the innovations: u_t = L f_t + v_t with
/// v_t ~ N(0, diag(noise_variances)) and unit-scale factor shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorStructure {
    pub loadings: DMatrix<f64>,
    pub noise_variances: DVector<f64>,
}

impl FactorStructure {
    pub fn new(loadings: DMatrix<f64>, noise_variances: DVector<f64>) -> Result<Self> {
        if loadings.nrows() != noise_variances.len() {
            return Err(Error::Dimension(format!(
                "{} loading rows but {} noise variances",
                loadings.nrows(),
                noise_variances.len()
            )));
        }
        if noise_variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("noise variances must be positive".into()));
        }
        Ok(FactorStructure { loadings, noise_variances })
    }

    pub fn n_vars(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    /// Implied innovation covariance L L' + diag(noise).
    pub fn innovation_covariance(&self) -> DMatrix<f64> {
        let mut cov = &self.loadings * self.loadings.transpose();
        for i in 0..self.n_vars() {
            cov[(i, i)] += self.noise_variances[i];
        }
        cov
    }
}

/// Latent state attached to each posterior draw: factor paths, their
/// scale-mixture weights, and the tail parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBlock {
    pub factors: DMatrix<f64>,
    pub weights: DMatrix<f64>,
    pub dof: DVector<f64>,
}

impl LatentBlock {
    pub fn new(factors: DMatrix<f64>, weights: DMatrix<f64>, dof: DVector<f64>) -> Result<Self> {
        if factors.shape() != weights.shape() {
            return Err(Error::Dimension(format!(
                "factors are {:?} but weights are {:?}",
                factors.shape(),
                weights.shape()
            )));
        }
        if factors.ncols() != dof.len() {
            return Err(Error::Dimension(format!(
                "{} factor columns but {} tail parameters",
                factors.ncols(),
                dof.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("mixture weights must be positive".into()));
        }
        if dof.iter().any(|&v| !(v > 2.0)) {
            return Err(Error::Domain("tail parameters must exceed 2".into()));
        }
        Ok(LatentBlock { factors, weights, dof })
    }
}

/// Cross-section GLS projection of innovations onto the factor space:
/// f_hat_t = (L' S^-1 L)^-1 L' S^-1 (y_t - x_t' B'), row by row.
pub fn project_shocks(
    structure: &FactorStructure,
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    coef: &VarCoefficients,
) -> Result<DMatrix<f64>> {
    let r = structure.n_factors();
    if r == 0 {
        return Ok(DMatrix::zeros(y.nrows(), 0));
    }
    let sinv = DMatrix::from_diagonal(&structure.noise_variances.map(|v| 1.0 / v));
    let a = structure.loadings.transpose() * &sinv;
    let gram = &a * &structure.loadings;
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or(Error::Decomposition { context: "factor projection Gram matrix".into() })?;
    let resid = y - coef.fitted(x);
    let mut out = DMatrix::zeros(y.nrows(), r);
    for t in 0..y.nrows() {
        let u = resid.row(t).transpose();
        let f = chol.solve(&(&a * u));
        out.row_mut(t).copy_from(&f.transpose());
    }
    Ok(out)
}

/// Model dimensions plus everything the sampler needs to run.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub prior: PriorHyperparams,
    pub restrictions: RestrictionSet,
    pub standardize: bool,
}

impl ModelSpec {
    pub fn new(n: usize, p: usize, r: usize) -> Self {
        ModelSpec {
            n,
            p,
            r,
            prior: PriorHyperparams::default(),
            restrictions: RestrictionSet::default(),
            standardize: true,
        }
    }

    pub fn design_width(&self) -> usize {
        1 + self.n * self.p
    }

    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("model needs at least one variable".into()));
        }
        if data.n_vars() != self.n {
            return Err(Error::Dimension(format!(
                "model has {} variables but data has {}",
                self.n,
                data.n_vars()
            )));
        }
        if self.r > self.n {
            return Err(Error::Domain(format!(
                "{} factors exceed the {}-variable cross-section",
                self.r, self.n
            )));
        }
        if 2 * self.r + 1 > self.n && self.r > 0 {
            log::warn!(
                "r = {} factors with n = {} variables exceeds the second-moment \
                 identification bound r <= (n-1)/2; identification now rests on \
                 higher moments alone",
                self.r,
                self.n
            );
        }
        let t_raw = data.n_obs();
        if t_raw <= self.p {
            return Err(Error::SampleSize(format!(
                "{t_raw} observations cannot support {} lags",
                self.p
            )));
        }
        let t = t_raw - self.p;
        if t <= self.design_width() {
            return Err(Error::SampleSize(format!(
                "effective sample {t} must exceed the design width {}",
                self.design_width()
            )));
        }
        self.prior.validate()?;
        self.restrictions.validate(self.n, self.r)?;
        Ok(())
    }
}
