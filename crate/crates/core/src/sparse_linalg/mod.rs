//! Sparse symmetric matrices, Kronecker products and sparse Cholesky
//! factorization with fill-reducing ordering.

mod cholesky;
mod csc;
mod ordering;

pub use cholesky::{cholesky, CholeskyFactor, CholeskySymbolic, PIVOT_TOLERANCE};
pub use csc::{kron, CscMatrix, SparseSym};
pub use ordering::minimum_degree;
