//! Higher-moment identification machinery: multivariate sample cumulants,
//! the model-implied moment restrictions, checks of the conditions under
//! which loadings are identified up to signed column permutations, the
//! normalization pass that resolves that remaining ambiguity, and a small
//! demonstration of why rotations are detectable for non-Gaussian factors.

use crate::error::{Error, Result};
use crate::gibbs::PosteriorSample;
use crate::rng::RngStream;
use crate::stats;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, StudentT};

/// Sample cumulant matrices of a multivariate series, up to order four:
/// sigma[i][j] = Cum(y_i, y_j), gamma[l][i][j] = Cum(y_i, y_j, y_l), and
/// omega[l][m][i][j] = Cum(y_i, y_j, y_l, y_m).
#[derive(Debug, Clone)]
pub struct CumulantSet {
    pub sigma: DMatrix<f64>,
    pub gamma: Vec<DMatrix<f64>>,
    pub omega: Vec<Vec<DMatrix<f64>>>,
}

impl CumulantSet {
    pub fn n_vars(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Compute sample cumulants of the columns of `e` through `max_order`
/// (2, 3, or 4). Columns are centered internally; moments use 1/T.
pub fn sample_cumulants(e: &DMatrix<f64>, max_order: usize) -> Result<CumulantSet> {
    if !(2..=4).contains(&max_order) {
        return Err(Error::Domain(format!("cumulant order {max_order} not in 2..=4")));
    }
    let (t, q) = e.shape();
    if t < 8 {
        return Err(Error::SampleSize(format!(
            "cumulant estimation needs at least 8 rows, got {t}"
        )));
    }
    let tf = t as f64;
    let mut c = e.clone();
    for j in 0..q {
        let m = c.column(j).sum() / tf;
        for s in 0..t {
            c[(s, j)] -= m;
        }
    }

    let mut sigma = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in i..q {
            let v = c.column(i).dot(&c.column(j)) / tf;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }

    let mut gamma = Vec::new();
    if max_order >= 3 {
        for l in 0..q {
            let mut g = DMatrix::zeros(q, q);
            for i in 0..q {
                for j in i..q {
                    let mut acc = 0.0;
                    for s in 0..t {
                        acc += c[(s, i)] * c[(s, j)] * c[(s, l)];
                    }
                    let v = acc / tf;
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            gamma.push(g);
        }
    }

    let mut omega = Vec::new();
    if max_order >= 4 {
        for l in 0..q {
            let mut row = Vec::new();
            for m in 0..q {
                let mut o = DMatrix::zeros(q, q);
                for i in 0..q {
                    for j in i..q {
                        let mut acc = 0.0;
                        for s in 0..t {
                            acc += c[(s, i)] * c[(s, j)] * c[(s, l)] * c[(s, m)];
                        }
                        let v = acc / tf
                            - sigma[(i, j)] * sigma[(l, m)]
                            - sigma[(i, l)] * sigma[(j, m)]
                            - sigma[(i, m)] * sigma[(j, l)];
                        o[(i, j)] = v;
                        o[(j, i)] = v;
                    }
                }
                row.push(o);
            }
            omega.push(row);
        }
    }

    Ok(CumulantSet { sigma, gamma, omega })
}

/// Model-implied cumulants of the innovations: covariance L L' + diag(s2),
/// third order L K3 diag(L_l) L', fourth order L K4 diag(L_l . L_m) L',
/// with L_l the l-th row of L.
pub fn implied_cumulants(
    loadings: &DMatrix<f64>,
    noise_variances: &DVector<f64>,
    k3: &DVector<f64>,
    k4: &DVector<f64>,
) -> Result<CumulantSet> {
    let (n, r) = loadings.shape();
    if noise_variances.len() != n || k3.len() != r || k4.len() != r {
        return Err(Error::Dimension(format!(
            "loadings are {n}x{r}; got {} noise variances, {} third and {} fourth cumulants",
            noise_variances.len(),
            k3.len(),
            k4.len()
        )));
    }
    let mut sigma = loadings * loadings.transpose();
    for i in 0..n {
        sigma[(i, i)] += noise_variances[i];
    }
    let scaled = |weights: &dyn Fn(usize) -> f64| -> DMatrix<f64> {
        // L diag(weights) L' assembled column by column.
        let mut out = DMatrix::zeros(n, n);
        for a in 0..r {
            let w = weights(a);
            if w == 0.0 {
                continue;
            }
            let col = loadings.column(a);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += w * col[i] * col[j];
                }
            }
        }
        out
    };
    let gamma: Vec<DMatrix<f64>> = (0..n)
        .map(|l| scaled(&|a| k3[a] * loadings[(l, a)]))
        .collect();
    let omega: Vec<Vec<DMatrix<f64>>> = (0..n)
        .map(|l| {
            (0..n)
                .map(|m| scaled(&|a| k4[a] * loadings[(l, a)] * loadings[(m, a)]))
                .collect()
        })
        .collect();
    Ok(CumulantSet { sigma, gamma, omega })
}

/// Which of the three loading-identification conditions hold: (1) at most
/// one factor with zero fourth cumulant, (2) at most one with zero third
/// cumulant, (3) at most one factor with both equal to zero.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentificationReport {
    pub tol: f64,
    pub skew_nonzero: Vec<bool>,
    pub kurt_nonzero: Vec<bool>,
    pub kurtosis_condition: bool,
    pub skewness_condition: bool,
    pub pairwise_condition: bool,
}

pub fn check_identification_conditions(
    k3: &[f64],
    k4: &[f64],
    tol: f64,
) -> Result<IdentificationReport> {
    if k3.len() != k4.len() {
        return Err(Error::Dimension(format!(
            "{} third cumulants but {} fourth cumulants",
            k3.len(),
            k4.len()
        )));
    }
    let skew_nonzero: Vec<bool> = k3.iter().map(|v| v.abs() > tol).collect();
    let kurt_nonzero: Vec<bool> = k4.iter().map(|v| v.abs() > tol).collect();
    let kurt_zero = kurt_nonzero.iter().filter(|&&b| !b).count();
    let skew_zero = skew_nonzero.iter().filter(|&&b| !b).count();
    let both_zero = skew_nonzero
        .iter()
        .zip(&kurt_nonzero)
        .filter(|(&s, &k)| !s && !k)
        .count();
    Ok(IdentificationReport {
        tol,
        skew_nonzero,
        kurt_nonzero,
        kurtosis_condition: kurt_zero <= 1,
        skewness_condition: skew_zero <= 1,
        pairwise_condition: both_zero <= 1,
    })
}

/// A relabeling of factor columns: normalized column j equals
/// signs[j] times original column perm[j]. Sign flips are exact.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn identity(r: usize) -> Self {
        SignedPermutation { perm: (0..r).collect(), signs: vec![1; r] }
    }

    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let r = perm.len();
        if signs.len() != r {
            return Err(Error::Dimension("permutation and signs disagree on length".into()));
        }
        let mut seen = vec![false; r];
        for &p in &perm {
            if p >= r || seen[p] {
                return Err(Error::Domain("not a permutation".into()));
            }
            seen[p] = true;
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Domain("signs must be +1 or -1".into()));
        }
        Ok(SignedPermutation { perm, signs })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(j, &p)| j == p) && self.signs.iter().all(|&s| s == 1)
    }

    /// Reorder and resign the columns of a matrix (loadings or factors).
    pub fn apply_to_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.ncols(), self.len());
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..self.len() {
            let src = m.column(self.perm[j]);
            let s = self.signs[j] as f64;
            for i in 0..m.nrows() {
                out[(i, j)] = s * src[i];
            }
        }
        out
    }

    /// Reorder columns without sign changes (mixture weights).
    pub fn permute_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.ncols(), self.len());
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..self.len() {
            out.column_mut(j).copy_from(&m.column(self.perm[j]));
        }
        out
    }

    /// Reorder the entries of a factor-indexed vector (tail parameters).
    pub fn permute_entries(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.len());
        DVector::from_fn(v.len(), |j, _| v[self.perm[j]])
    }

    /// Composition: applying `self` after `other`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        let perm = (0..self.len()).map(|j| other.perm[self.perm[j]]).collect();
        let signs = (0..self.len())
            .map(|j| self.signs[j] * other.signs[self.perm[j]])
            .collect();
        SignedPermutation { perm, signs }
    }

    pub fn inverse(&self) -> Self {
        let r = self.len();
        let mut perm = vec![0usize; r];
        let mut signs = vec![1i8; r];
        for j in 0..r {
            perm[self.perm[j]] = j;
            signs[self.perm[j]] = self.signs[j];
        }
        SignedPermutation { perm, signs }
    }
}

/// Enumerate permutations of 0..r in lexicographic order.
fn for_each_permutation<F: FnMut(&[usize])>(r: usize, mut f: F) {
    let mut items: Vec<usize> = (0..r).collect();
    fn rec<F: FnMut(&[usize])>(items: &mut Vec<usize>, k: usize, f: &mut F) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            rec(items, k + 1, f);
            items.swap(k, i);
        }
    }
    rec(&mut items, 0, &mut f);
}

/// Minimum-cost assignment (rows to columns) for a square cost matrix via
/// the O(n^3) potentials method; returns for each row its assigned column.
pub fn hungarian_min_cost(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Signed permutation bringing `loadings` as close as possible to
/// `template` in Frobenius distance. Column norms are assignment-invariant,
/// so this maximizes the summed absolute column dot products: exhaustively
/// for r <= 6, by minimum-cost assignment above that.
pub fn match_template(
    loadings: &DMatrix<f64>,
    template: &DMatrix<f64>,
) -> Result<SignedPermutation> {
    if loadings.shape() != template.shape() {
        return Err(Error::Dimension(format!(
            "draw is {:?} but template is {:?}",
            loadings.shape(),
            template.shape()
        )));
    }
    let r = loadings.ncols();
    if r == 0 {
        return Ok(SignedPermutation::identity(0));
    }
    // dot[a][b] = <draw column a, template column b>.
    let dot = loadings.transpose() * template;

    let perm: Vec<usize> = if r <= 6 {
        let mut best_score = f64::NEG_INFINITY;
        let mut best: Vec<usize> = (0..r).collect();
        for_each_permutation(r, |p| {
            // p[j] = draw column placed at template slot j.
            let score: f64 = (0..r).map(|j| dot[(p[j], j)].abs()).sum();
            if score > best_score {
                best_score = score;
                best = p.to_vec();
            }
        });
        best
    } else {
        let cost = DMatrix::from_fn(r, r, |a, b| -dot[(a, b)].abs());
        let row_to_col = hungarian_min_cost(&cost);
        let mut perm = vec![0usize; r];
        for (a, &b) in row_to_col.iter().enumerate() {
            perm[b] = a;
        }
        perm
    };
    let signs: Vec<i8> = (0..r)
        .map(|j| if dot[(perm[j], j)] < 0.0 { -1 } else { 1 })
        .collect();
    SignedPermutation::new(perm, signs)
}

/// Signed permutation ordering factor columns by the absolute correlation
/// of their factor paths with a proxy series, highest first. The leading
/// column is signed so its correlation with the proxy is positive; the
/// remaining columns are signed so their largest-magnitude loading is
/// positive. Returns the permutation and whether a correlation tie within
/// 1e-12 was broken by column index.
pub fn order_by_proxy(
    loadings: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    proxy: &DVector<f64>,
) -> Result<(SignedPermutation, bool)> {
    let r = factors.ncols();
    if loadings.ncols() != r {
        return Err(Error::Dimension("loadings and factors disagree on factor count".into()));
    }
    if factors.nrows() != proxy.len() {
        return Err(Error::Dimension(format!(
            "factors have {} rows, proxy has {}",
            factors.nrows(),
            proxy.len()
        )));
    }
    if r == 0 {
        return Ok((SignedPermutation::identity(0), false));
    }
    let proxy_col: Vec<f64> = proxy.iter().copied().collect();
    let corrs: Vec<f64> = (0..r)
        .map(|a| {
            let col: Vec<f64> = factors.column(a).iter().copied().collect();
            stats::correlation(&col, &proxy_col)
        })
        .collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        corrs[b]
            .abs()
            .partial_cmp(&corrs[a].abs())
            .expect("finite correlations")
            .then(a.cmp(&b))
    });
    let mut tie = false;
    for w in order.windows(2) {
        if (corrs[w[0]].abs() - corrs[w[1]].abs()).abs() <= 1e-12 {
            tie = true;
        }
    }
    let signs: Vec<i8> = order
        .iter()
        .enumerate()
        .map(|(slot, &a)| {
            if slot == 0 {
                if corrs[a] < 0.0 {
                    -1
                } else {
                    1
                }
            } else {
                // Largest-magnitude loading of the column decides.
                let col = loadings.column(a);
                let mut best = 0usize;
                for i in 1..col.len() {
                    if col[i].abs() > col[best].abs() {
                        best = i;
                    }
                }
                if col[best] < 0.0 {
                    -1
                } else {
                    1
                }
            }
        })
        .collect();
    Ok((SignedPermutation { perm: order, signs }, tie))
}

/// How retained draws are aligned before factor-indexed summaries.
#[derive(Debug, Clone)]
pub enum NormalizationMode {
    /// Leave draws as sampled.
    None,
    /// Match every draw to the first retained draw.
    FirstDraw,
    /// Match every draw to a fixed loading matrix.
    Template(DMatrix<f64>),
    /// Order by absolute correlation with a proxy series.
    Proxy(DVector<f64>),
}

/// The default: first-draw matching, unless restrictions pin specific
/// cells, in which case reordering would silently violate them.
pub fn default_mode(restrictions: &crate::restrict::RestrictionSet) -> NormalizationMode {
    if restrictions.is_empty() {
        NormalizationMode::FirstDraw
    } else {
        NormalizationMode::None
    }
}

/// Align all retained draws in place; returns the permutation applied to
/// each draw. `proxy_target` is the factor index the proxy equation loads
/// on, needed to carry its slope draws through the relabeling.
pub fn normalize_posterior(
    sample: &mut PosteriorSample,
    mode: &NormalizationMode,
    proxy_target: Option<usize>,
) -> Result<Vec<SignedPermutation>> {
    let draws = sample.n_draws();
    if sample.r == 0 || matches!(mode, NormalizationMode::None) {
        return Ok(vec![SignedPermutation::identity(sample.r); draws]);
    }
    let template_store;
    let template: Option<&DMatrix<f64>> = match mode {
        NormalizationMode::FirstDraw => {
            template_store = sample.loadings[0].clone();
            Some(&template_store)
        }
        NormalizationMode::Template(t) => Some(t),
        NormalizationMode::Proxy(_) => None,
        NormalizationMode::None => unreachable!(),
    };

    let mut perms = Vec::with_capacity(draws);
    for d in 0..draws {
        let sp = match mode {
            NormalizationMode::Proxy(series) => {
                order_by_proxy(&sample.loadings[d], &sample.factors[d], series)?.0
            }
            _ => match_template(&sample.loadings[d], template.expect("template set"))?,
        };
        if !sp.is_identity() {
            sample.loadings[d] = sp.apply_to_columns(&sample.loadings[d]);
            sample.factors[d] = sp.apply_to_columns(&sample.factors[d]);
            sample.weights[d] = sp.permute_columns(&sample.weights[d]);
            sample.dof[d] = sp.permute_entries(&sample.dof[d]);
            if let (Some(tgt), Some(px)) = (proxy_target, sample.proxy.get_mut(d)) {
                let slot = sp.perm.iter().position(|&p| p == tgt).expect("target in permutation");
                px.slope *= sp.signs[slot] as f64;
            }
        }
        perms.push(sp);
    }
    Ok(perms)
}

/// What the planar-rotation demonstration reports: correlations of the two
/// factors and of their squares, before and after rotating by the angle.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RotationDemo {
    pub angle: f64,
    pub t: usize,
    pub corr_before: f64,
    pub corr_sq_before: f64,
    pub corr_after: f64,
    pub corr_sq_after: f64,
}

/// Source law for the rotation demonstration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationSource {
    Gaussian,
    StudentT(f64),
}

/// Draw two independent factors, rotate them by `angle`, and report the
/// correlations of levels and squares on both sides. Independent Gaussian
/// pairs are rotation-invariant; heavy-tailed pairs pick up dependence in
/// the squares, which is what higher-moment identification exploits.
pub fn rotation_demo(
    source: RotationSource,
    angle: f64,
    t: usize,
    rng: &mut RngStream,
) -> Result<RotationDemo> {
    if t < 1000 {
        return Err(Error::SampleSize(format!("rotation demo needs T >= 1000, got {t}")));
    }
    if let RotationSource::StudentT(v) = source {
        if !(v > 2.0 && v.is_finite()) {
            return Err(Error::Domain(format!("tail parameter {v} must exceed 2")));
        }
    }
    let mut f1 = Vec::with_capacity(t);
    let mut f2 = Vec::with_capacity(t);
    match source {
        RotationSource::Gaussian => {
            for _ in 0..t {
                f1.push(StandardNormal.sample(rng));
                f2.push(StandardNormal.sample(rng));
            }
        }
        RotationSource::StudentT(v) => {
            let dist = StudentT::new(v).map_err(|e| Error::Domain(e.to_string()))?;
            for _ in 0..t {
                f1.push(dist.sample(rng));
                f2.push(dist.sample(rng));
            }
        }
    }
    let (c, s) = (angle.cos(), angle.sin());
    let g1: Vec<f64> = f1.iter().zip(&f2).map(|(&a, &b)| c * a + s * b).collect();
    let g2: Vec<f64> = f1.iter().zip(&f2).map(|(&a, &b)| -s * a + c * b).collect();
    let sq = |xs: &[f64]| xs.iter().map(|&x| x * x).collect::<Vec<f64>>();
    Ok(RotationDemo {
        angle,
        t,
        corr_before: stats::correlation(&f1, &f2),
        corr_sq_before: stats::correlation(&sq(&f1), &sq(&f2)),
        corr_after: stats::correlation(&g1, &g2),
        corr_sq_after: stats::correlation(&sq(&g1), &sq(&g2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gaussian_higher_cumulants_vanish() {
        let mut rng = RngStream::new(100, 0);
        let t = 1_000_000;
        let e = DMatrix::from_fn(t, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let cs = sample_cumulants(&e, 4).unwrap();
        assert!((cs.sigma[(0, 0)] - 1.0).abs() < 0.01);
        assert!(cs.sigma[(0, 1)].abs() < 0.01);
        for g in &cs.gamma {
            assert!(g.amax() < 0.02);
        }
        for row in &cs.omega {
            for o in row {
                assert!(o.amax() < 0.02);
            }
        }
    }

    #[test]
    fn t8_fourth_cumulant_matches_analytic() {
        let mut rng = RngStream::new(101, 0);
        let dist = StudentT::new(8.0).unwrap();
        let scale = (6.0f64 / 8.0).sqrt(); // unit variance
        let t = 1_000_000;
        let e = DMatrix::from_fn(t, 1, |_, _| scale * dist.sample(&mut rng));
        let cs = sample_cumulants(&e, 4).unwrap();
        let k4 = cs.omega[0][0][(0, 0)];
        assert!((k4 - 1.5).abs() < 0.15, "kappa4 = {k4}");
    }

    #[test]
    fn skewed_heavy_tailed_third_cumulant() {
        // Sample skewness of this law converges; the fourth cumulant is
        // finite but its estimator has infinite variance, so only a
        // directional bound is asserted.
        let sampler = crate::kernels::PearsonSampler::new(0.68, 15.0).unwrap();
        let mut rng = RngStream::new(102, 0);
        let t = 1_000_000;
        let e = DMatrix::from_fn(t, 1, |_, _| sampler.sample(&mut rng).unwrap());
        let cs = sample_cumulants(&e, 4).unwrap();
        let k3 = cs.gamma[0][(0, 0)];
        let k4 = cs.omega[0][0][(0, 0)];
        assert!((k3 - 0.68).abs() < 0.15, "kappa3 = {k3}");
        assert!(k4 > 5.0, "kappa4 = {k4}");
    }

    #[test]
    fn cumulants_need_enough_rows() {
        let e = DMatrix::zeros(5, 2);
        assert!(matches!(sample_cumulants(&e, 2), Err(Error::SampleSize(_))));
        let e = DMatrix::zeros(20, 2);
        assert!(sample_cumulants(&e, 5).is_err());
    }

    #[test]
    fn implied_cumulants_small_cases() {
        // No loadings: covariance reduces to the noise, higher orders vanish.
        let l = DMatrix::zeros(2, 1);
        let s2 = DVector::from_vec(vec![0.5, 2.0]);
        let cs = implied_cumulants(&l, &s2, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert_eq!(cs.sigma[(0, 0)], 0.5);
        assert_eq!(cs.sigma[(1, 1)], 2.0);
        assert!(cs.gamma[0].amax() == 0.0 && cs.omega[1][1].amax() == 0.0);

        // L = (1,1)', kappa3 = c: every entry of Gamma(0) equals c.
        let l = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let c = 0.7;
        let cs = implied_cumulants(
            &l,
            &DVector::from_element(2, 1.0),
            &DVector::from_element(1, c),
            &DVector::from_element(1, 0.0),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((cs.gamma[0][(i, j)] - c).abs() < 1e-15);
                assert!((cs.gamma[1][(i, j)] - c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn implied_cumulants_are_multilinear_in_columns() {
        let l = DMatrix::from_column_slice(3, 1, &[1.0, -0.5, 0.3]);
        let s2 = DVector::from_element(3, 1.0);
        let k3 = DVector::from_element(1, 2.0);
        let k4 = DVector::from_element(1, 6.0);
        let base = implied_cumulants(&l, &s2, &k3, &k4).unwrap();
        let scaled = implied_cumulants(&(2.0 * &l), &s2, &k3, &k4).unwrap();
        for li in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (scaled.gamma[li][(i, j)] - 8.0 * base.gamma[li][(i, j)]).abs() < 1e-12
                    );
                    assert!(
                        (scaled.omega[li][li][(i, j)] - 16.0 * base.omega[li][li][(i, j)]).abs()
                            < 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn implied_matches_simulation() {
        // Two independent standardized exponential factors (kappa3 = 2,
        // kappa4 = 6), all moments finite.
        let mut rng = RngStream::new(103, 0);
        let t = 200_000;
        let l = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.8, 1.0, 0.4, -0.6]);
        let s2: DVector<f64> = DVector::from_vec(vec![0.3, 0.5, 0.4]);
        let exp = rand_distr::Exp::new(1.0).unwrap();
        let mut e = DMatrix::zeros(t, 3);
        for s in 0..t {
            let f0: f64 = exp.sample(&mut rng) - 1.0;
            let f1: f64 = exp.sample(&mut rng) - 1.0;
            for i in 0..3 {
                let z: f64 = StandardNormal.sample(&mut rng);
                e[(s, i)] = l[(i, 0)] * f0 + l[(i, 1)] * f1 + s2[i].sqrt() * z;
            }
        }
        let sample = sample_cumulants(&e, 4).unwrap();
        let implied = implied_cumulants(
            &l,
            &s2,
            &DVector::from_element(2, 2.0),
            &DVector::from_element(2, 6.0),
        )
        .unwrap();
        assert!((&sample.sigma - &implied.sigma).amax() < 0.05);
        for li in 0..3 {
            assert!((&sample.gamma[li] - &implied.gamma[li]).amax() < 0.12);
            for m in 0..3 {
                assert!((&sample.omega[li][m] - &implied.omega[li][m]).amax() < 0.6);
            }
        }
    }

    #[test]
    fn condition_report_boundaries() {
        // Two factors with zero kurtosis: condition 1 fails.
        let rep = check_identification_conditions(&[1.0, 1.0, 1.0], &[0.0, 0.0, 3.0], 0.1).unwrap();
        assert!(!rep.kurtosis_condition);
        assert!(rep.skewness_condition);
        assert!(rep.pairwise_condition);

        // All skewed: condition 2 holds.
        let rep = check_identification_conditions(&[0.5, -0.5], &[0.0, 0.0], 0.1).unwrap();
        assert!(rep.skewness_condition);
        assert!(!rep.kurtosis_condition);
        assert!(rep.pairwise_condition);

        // Two fully Gaussian factors: condition 3 fails.
        let rep = check_identification_conditions(&[0.0, 0.0], &[0.0, 0.0], 0.1).unwrap();
        assert!(!rep.pairwise_condition);
    }

    #[test]
    fn signed_permutation_algebra() {
        let sp = SignedPermutation::new(vec![2, 0, 1], vec![-1, 1, -1]).unwrap();
        let inv = sp.inverse();
        assert!(sp.compose(&inv).is_identity());
        assert!(inv.compose(&sp).is_identity());

        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let applied = sp.apply_to_columns(&m);
        assert_eq!(applied[(0, 0)], -3.0);
        assert_eq!(applied[(0, 1)], 1.0);
        assert_eq!(applied[(0, 2)], -2.0);
        let back = inv.apply_to_columns(&applied);
        assert_eq!(back, m);

        assert!(SignedPermutation::new(vec![0, 0], vec![1, 1]).is_err());
        assert!(SignedPermutation::new(vec![0, 1], vec![2, 1]).is_err());
    }

    #[test]
    fn template_matching_recovers_scrambling_exactly() {
        let mut rng = RngStream::new(104, 0);
        let template = DMatrix::from_fn(6, 3, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let q = SignedPermutation::new(vec![1, 2, 0], vec![-1, 1, -1]).unwrap();
        let scrambled = q.apply_to_columns(&template);
        let found = match_template(&scrambled, &template).unwrap();
        let fixed = found.apply_to_columns(&scrambled);
        assert_eq!(fixed, template); // sign flips and reorders are exact
        assert_eq!(found, q.inverse());

        // Already aligned: identity.
        let id = match_template(&template, &template).unwrap();
        assert!(id.is_identity());
    }

    #[test]
    fn template_matching_is_group_invariant() {
        let mut rng = RngStream::new(105, 0);
        let template = DMatrix::from_fn(5, 3, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let draw = DMatrix::from_fn(5, 3, |i, j| template[(i, j)] + 0.01 * (i as f64 - j as f64));
        let normalized = match_template(&draw, &template).unwrap().apply_to_columns(&draw);
        for _ in 0..20 {
            let perm = match rng.gen_range(0..3) {
                0 => vec![1, 0, 2],
                1 => vec![2, 1, 0],
                _ => vec![1, 2, 0],
            };
            let signs: Vec<i8> = (0..3).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            let q = SignedPermutation::new(perm, signs).unwrap();
            let scrambled = q.apply_to_columns(&draw);
            let renorm = match_template(&scrambled, &template)
                .unwrap()
                .apply_to_columns(&scrambled);
            assert_eq!(renorm, normalized);
        }
    }

    #[test]
    fn hungarian_agrees_with_exhaustive_search() {
        let mut rng = RngStream::new(106, 0);
        for _ in 0..40 {
            let cost = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-3.0..3.0));
            let assign = hungarian_min_cost(&cost);
            let got: f64 = assign.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            let mut best = f64::INFINITY;
            for_each_permutation(5, |p| {
                let s: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
                if s < best {
                    best = s;
                }
            });
            assert!((got - best).abs() < 1e-9, "hungarian {got} vs exhaustive {best}");
        }
    }

    #[test]
    fn large_template_match_uses_assignment_path() {
        let mut rng = RngStream::new(107, 0);
        let template = DMatrix::from_fn(10, 7, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let q = SignedPermutation::new(vec![3, 0, 6, 2, 5, 1, 4], vec![-1, 1, 1, -1, 1, -1, 1])
            .unwrap();
        let scrambled = q.apply_to_columns(&template);
        let found = match_template(&scrambled, &template).unwrap();
        assert_eq!(found.apply_to_columns(&scrambled), template);
    }

    #[test]
    fn proxy_ordering_prefers_correlated_factor() {
        let mut rng = RngStream::new(108, 0);
        let t = 400;
        let proxy = DVector::from_fn(t, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let mut factors = DMatrix::zeros(t, 2);
        for s in 0..t {
            let z: f64 = StandardNormal.sample(&mut rng);
            factors[(s, 0)] = z;
            // Strongly negatively correlated with the proxy.
            let z2: f64 = StandardNormal.sample(&mut rng);
            factors[(s, 1)] = -proxy[s] + 0.3 * z2;
        }
        let loadings = DMatrix::from_row_slice(3, 2, &[0.2, 0.5, -0.9, 0.1, 0.4, 0.3]);
        let (sp, tie) = order_by_proxy(&loadings, &factors, &proxy).unwrap();
        assert!(!tie);
        assert_eq!(sp.perm, vec![1, 0]);
        assert_eq!(sp.signs[0], -1); // flip so the winner correlates positively
        // Non-winner signed so its largest-magnitude loading (-0.9) flips.
        assert_eq!(sp.signs[1], -1);

        // An exact tie is flagged.
        let same = DMatrix::from_fn(t, 2, |s, _| proxy[s]);
        let (_, tie) = order_by_proxy(&loadings, &same, &proxy).unwrap();
        assert!(tie);
    }

    #[test]
    fn rotation_demo_behaviors() {
        let mut rng = RngStream::new(109, 0);
        assert!(rotation_demo(RotationSource::Gaussian, 0.6, 100, &mut rng).is_err());

        let zero = rotation_demo(RotationSource::StudentT(4.0), 0.0, 2000, &mut rng).unwrap();
        assert!((zero.corr_before - zero.corr_after).abs() < 1e-12);
        assert!((zero.corr_sq_before - zero.corr_sq_after).abs() < 1e-12);

        let gauss = rotation_demo(
            RotationSource::Gaussian,
            std::f64::consts::PI / 5.0,
            60_000,
            &mut rng,
        )
        .unwrap();
        assert!(gauss.corr_sq_after.abs() < 0.03);
        assert!(gauss.corr_after.abs() < 0.03);
    }
}
