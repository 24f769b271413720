//! Dense real linear algebra and seeded sampling.

mod eigen;
mod matrix;
mod rng;

pub use eigen::{sym_eig, thin_svd, top_singular_value, SymEigen, ThinSvd};
pub use matrix::{dot, norm, Matrix};
pub use rng::{gaussian_matrix, RngState};
