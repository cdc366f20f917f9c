//! Shared fixtures and dense oracles for unit tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid_data::GridSpec;
use crate::likelihoods::{LocalFit, MleField, ModelKind};
use crate::sparse_linalg::SparseSym;

pub fn kind_with(p: usize) -> ModelKind {
    match p {
        2 => ModelKind::Logreg,
        3 => ModelKind::Mos,
        4 => ModelKind::Ngr,
        _ => panic!("no model with {p} parameters"),
    }
}

/// Random symmetric positive definite `p × p` block (row-major).
pub fn random_spd(p: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(p, p) * 0.5;
    (m * scale).transpose().as_slice().to_vec()
}

/// Random MLE field with `p ∈ {2, 3, 4}` parameters.
pub fn random_field(grid: &GridSpec, p: usize, diag_only: bool, seed: u64) -> MleField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fits = (0..grid.n_sites())
        .map(|_| {
            let mut info = random_spd(p, rng.random_range(0.5..4.0), &mut rng);
            if diag_only {
                for r in 0..p {
                    for c in 0..p {
                        if r != c {
                            info[r * p + c] = 0.0;
                        }
                    }
                }
            }
            LocalFit {
                theta_hat: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
                info,
                converged: true,
                loglik: 0.0,
                info_floored: false,
                degenerate_variance: false,
            }
        })
        .collect();
    MleField::new(grid.clone(), kind_with(p), fits).unwrap()
}

pub fn dense(m: &SparseSym<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.dim(), m.dim());
    for (r, c, v) in m.as_csc().triplets() {
        d[(r, c)] += v;
    }
    d
}

/// Dense blocked-order information built directly from the index formula.
pub fn dense_information(field: &MleField<f64>) -> DMatrix<f64> {
    let p = field.n_params();
    let n = field.n_sites();
    let mut j = DMatrix::zeros(p * n, p * n);
    for (s, fit) in field.fits.iter().enumerate() {
        for a in 0..p {
            for b in 0..p {
                j[(a * n + s, b * n + s)] = fit.info[a * p + b];
            }
        }
    }
    j
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Largest relative error, with absolute error used for entries near zero.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
