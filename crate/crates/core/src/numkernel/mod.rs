//! Dense numerical kernels shared by the rest of the crate.
//!
//! Everything here is a pure function of its inputs: a row-major matrix type,
//! a one-sided Jacobi thin SVD, a symmetric eigensolver, Euclidean projection
//! onto the probability simplex and the chi-square upper tail.

mod chisq;
mod eigen;
mod matrix;
mod simplex;
mod svd;

pub use chisq::chi_square_sf;
pub use eigen::{sym_eig, EigenWhich, SymEigen};
pub use matrix::RealMatrix;
pub use simplex::project_row_simplex;
pub use svd::{svd_thin, SvdFactors};
