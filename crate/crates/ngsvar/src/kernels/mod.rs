//! Low-level samplers used by the Gibbs sweep and the simulation harness:
//! inverse-gamma draws and fits, precision-form Gaussian sampling for
//! block-diagonal systems, griddy Gibbs on a bounded grid, robust truncated
//! normals, and a Pearson-system sampler for moment-targeted distributions.

pub mod griddy;
pub mod invgamma;
pub mod pearson;
pub mod precision;
pub mod truncnorm;

pub use griddy::sample_griddy;
pub use invgamma::{fit_inverse_gamma_mle, sample_inverse_gamma, InverseGammaParams};
pub use pearson::{PearsonKind, PearsonSampler};
pub use precision::{
    chol_in_place, chol_solve_in_place, chol_tr_solve_in_place, sample_block_in_place,
    sample_block_precision_normal, BlockPrecision,
};
pub use truncnorm::sample_truncated_normal;
