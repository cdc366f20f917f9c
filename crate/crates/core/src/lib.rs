//! Max-and-Smooth: two-step approximate Bayesian inference for spatial
//! fields of ensemble postprocessing parameters.
//!
//! Local models (MOS, logistic regression, NGR) are fitted independently at
//! each grid point; the maximum likelihood estimates are then smoothed with
//! a second-order random walk prior on the grid, treating the estimates as
//! Gaussian observations with precision equal to their observed information.

pub mod dense;
pub mod error;
pub mod experiments;
pub mod grid_data;
pub mod hyperparams;
pub mod likelihoods;
pub mod optim;
pub mod scalar;
pub mod smoother;
pub mod sparse_linalg;
pub mod spatial_prior;
pub mod verification;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MleFieldF64 = likelihoods::MleField<f64>;
pub type MleFieldF32 = likelihoods::MleField<f32>;
pub type SparseSymF64 = sparse_linalg::SparseSym<f64>;
pub type CholeskyF64 = sparse_linalg::CholeskyFactor<f64>;
pub type SmoothResultF64 = smoother::SmoothResult<f64>;
pub type SmoothResultF32 = smoother::SmoothResult<f32>;
