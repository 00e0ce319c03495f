//! Dense complex matrices and a Hermitian eigensolver for small dimensions.

mod eigen;
mod matrix;

pub use eigen::{eig_hermitian, EigenDecomposition, MAX_SWEEPS};
pub use matrix::{unitary_from_columns, ComplexMatrix, RealMatrix};
