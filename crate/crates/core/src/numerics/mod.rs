//! Numerical foundations: deterministic RNG streams, special functions and
//! the small dense linear algebra the model reduction needs.

pub mod linalg;
pub mod rng;
pub mod special;

pub use linalg::{cholesky, sym_eigen, sym_sandwich, Matrix, SymMatrix};
pub use rng::RngStream;
pub use special::{inv_norm_cdf, ln_gamma, norm_pdf, reg_inc_beta, t_cdf, t_quantile};
