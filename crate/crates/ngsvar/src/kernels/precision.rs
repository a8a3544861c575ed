use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Symmetric positive-definite precision matrix with block-diagonal
/// structure: equally sized blocks along the diagonal, zeros elsewhere.
///
/// This is the precision of the joint conditional of a latent series whose
/// time slices are independent given the conditioning set, so sampling
/// factorizes into one small Cholesky solve per block.
#[derive(Debug, Clone)]
pub struct BlockPrecision {
    block_dim: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl BlockPrecision {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let block_dim = blocks.first().map_or(0, |b| b.nrows());
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != b.ncols() {
                return Err(Error::Dimension(format!(
                    "precision block {i} is {}x{}, expected square",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.nrows() != block_dim {
                return Err(Error::Dimension(format!(
                    "precision block {i} has dimension {}, expected {block_dim}",
                    b.nrows()
                )));
            }
        }
        Ok(BlockPrecision { block_dim, blocks })
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        self.block_dim * self.blocks.len()
    }

    /// Mean of N(K^-1 b, K^-1), i.e. the solve K x = b.
    pub fn mean(&self, linear: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(linear)?;
        let mut out = linear.clone();
        let mut buf = DMatrix::zeros(self.block_dim, self.block_dim);
        for (i, block) in self.blocks.iter().enumerate() {
            buf.copy_from(block);
            if !chol_in_place(&mut buf) {
                return Err(Error::Decomposition { context: format!("precision block {i}") });
            }
            let mut seg = out.rows_mut(i * self.block_dim, self.block_dim);
            chol_solve_in_place(&buf, &mut seg);
        }
        Ok(out)
    }

    /// Dense covariance K^-1 (block diagonal). Intended for small systems
    /// and cross-checks; quadratic in the total dimension.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let d = self.total_dim();
        let mut out = DMatrix::zeros(d, d);
        for (i, block) in self.blocks.iter().enumerate() {
            let inv = block.clone().try_inverse().ok_or(Error::Decomposition {
                context: format!("precision block {i}"),
            })?;
            out.view_mut((i * self.block_dim, i * self.block_dim), (self.block_dim, self.block_dim))
                .copy_from(&inv);
        }
        Ok(out)
    }

    /// Draw from N(K^-1 b, K^-1) one block at a time.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        linear: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        self.check_len(linear)?;
        let mut out = linear.clone();
        let mut buf = DMatrix::zeros(self.block_dim, self.block_dim);
        let mut z = DVector::zeros(self.block_dim);
        for (i, block) in self.blocks.iter().enumerate() {
            buf.copy_from(block);
            let mut seg = out.rows_mut(i * self.block_dim, self.block_dim);
            sample_block_in_place(&mut buf, &mut seg, &mut z, rng)
                .map_err(|_| Error::Decomposition { context: format!("precision block {i}") })?;
        }
        Ok(out)
    }

    fn check_len(&self, linear: &DVector<f64>) -> Result<()> {
        if linear.len() != self.total_dim() {
            return Err(Error::Dimension(format!(
                "linear term has length {}, precision has total dimension {}",
                linear.len(),
                self.total_dim()
            )));
        }
        Ok(())
    }
}

/// Draw from the Gaussian with precision `k` and linear term `b`, i.e.
/// N(k^-1 b, k^-1).
pub fn sample_block_precision_normal<R: Rng + ?Sized>(
    k: &BlockPrecision,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    k.sample(linear, rng)
}

/// In-place lower Cholesky of a symmetric matrix (lower triangle read,
/// lower triangle overwritten). Returns false when not positive definite.
pub fn chol_in_place(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let l = d.sqrt();
        a[(j, j)] = l;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / l;
        }
    }
    true
}

/// Solve (L L') x = b in place given the lower factor from `chol_in_place`.
pub fn chol_solve_in_place<S>(l: &DMatrix<f64>, b: &mut nalgebra::Vector<f64, nalgebra::Dyn, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn>,
{
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solve L' x = b in place given a lower-triangular factor.
pub fn chol_tr_solve_in_place<S>(l: &DMatrix<f64>, b: &mut nalgebra::Vector<f64, nalgebra::Dyn, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn>,
{
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// One-block core shared by the block sampler and the Gibbs hot path:
/// overwrites `prec` with its Cholesky factor and `rhs` with a draw from
/// N(prec^-1 rhs, prec^-1). `z` is scratch of the block dimension.
pub fn sample_block_in_place<R, S>(
    prec: &mut DMatrix<f64>,
    rhs: &mut nalgebra::Vector<f64, nalgebra::Dyn, S>,
    z: &mut DVector<f64>,
    rng: &mut R,
) -> Result<()>
where
    R: Rng + ?Sized,
    S: nalgebra::StorageMut<f64, nalgebra::Dyn>,
{
    if !chol_in_place(prec) {
        return Err(Error::Decomposition { context: "precision block".into() });
    }
    chol_solve_in_place(prec, rhs);
    for i in 0..z.len() {
        z[i] = rng.sample(StandardNormal);
    }
    chol_tr_solve_in_place(prec, z);
    for i in 0..z.len() {
        rhs[i] += z[i];
    }
    Ok(())
}
