//! Dense linear algebra used throughout the analysis.

mod eig;
mod lstsq;
mod matrix;
mod pca;
mod symmetric;

pub use eig::{eig_general, eigenvalues, CMatrix, EigenDecomposition, MAX_CONDITION};
pub use lstsq::{jacobi_svd, solve_least_squares, JacobiSvd, LeastSquares};
pub use matrix::{axpy, dot, norm2, sub, Matrix};
pub use pca::{pca_fit, PcaFit};
pub use symmetric::{symmetric_eigen, SymmetricEigen};
