//! The smoothing step: Gaussian posterior of the parameter field given the
//! MLE field (as noisy measurements with precision `Ĵ`) and the prior.
//!
//! `E(θ | θ̂) = (Q_θ + Ĵ)⁻¹ (Q_θ μ_θ + Ĵ θ̂)` and
//! `Var(θ | θ̂) = (Q_θ + Ĵ)⁻¹`.

mod io;

pub use io::{read_smooth_result, write_smooth_result, SMOOTH_HEADER};

use std::fmt;
use std::str::FromStr;

use crate::dense::{inverse, psd_floor};
use crate::error::{Error, Result};
use crate::grid_data::GridSpec;
use crate::likelihoods::{MleField, ModelKind};
use crate::scalar::Real;
use crate::spatial_prior::{assemble_q, block_precision, PriorSpec};
use crate::sparse_linalg::{CholeskyFactor, CholeskySymbolic, CscMatrix, SparseSym};

/// Eigenvalue floor for local information blocks entering the smoother.
pub const BLOCK_EIGEN_FLOOR: f64 = 1e-8;

/// Index map between interleaved order `(θ_1, …, θ_S)` (all parameters of a
/// site together) and blocked order `(α_1..α_S, β_1..β_S, …)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamOrdering {
    pub n_params: usize,
    pub n_sites: usize,
}

impl ParamOrdering {
    pub fn new(n_params: usize, n_sites: usize) -> Self {
        Self { n_params, n_sites }
    }

    pub fn for_field<T>(field: &MleField<T>) -> Self {
        Self::new(field.kind.n_params(), field.fits.len())
    }

    pub fn len(&self) -> usize {
        self.n_params * self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocked(&self, site: usize, param: usize) -> usize {
        param * self.n_sites + site
    }

    pub fn interleaved(&self, site: usize, param: usize) -> usize {
        site * self.n_params + param
    }

    /// `(site, param)` of a blocked index.
    pub fn locate_blocked(&self, i: usize) -> (usize, usize) {
        (i % self.n_sites, i / self.n_sites)
    }

    /// `perm[blocked] = interleaved`.
    pub fn permutation(&self) -> Vec<usize> {
        (0..self.len())
            .map(|i| {
                let (s, m) = self.locate_blocked(i);
                self.interleaved(s, m)
            })
            .collect()
    }

    pub fn to_blocked<T: Copy>(&self, interleaved: &[T]) -> Vec<T> {
        self.permutation().into_iter().map(|k| interleaved[k]).collect()
    }

    pub fn to_interleaved<T: Copy + Default>(&self, blocked: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); blocked.len()];
        for (i, k) in self.permutation().into_iter().enumerate() {
            out[k] = blocked[i];
        }
        out
    }
}

/// Smoothing variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmoothMethod {
    /// Joint smoothing with the full local information blocks.
    Full,
    /// Per-parameter smoothing with `J̃ = [diag(Ĵ⁻¹)]⁻¹`.
    DiagonalIndependent,
}

impl SmoothMethod {
    pub fn name(self) -> &'static str {
        match self {
            SmoothMethod::Full => "full",
            SmoothMethod::DiagonalIndependent => "diagonal_independent",
        }
    }
}

impl fmt::Display for SmoothMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmoothMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SmoothMethod::Full),
            "independent" | "diagonal_independent" | "indep" => Ok(SmoothMethod::DiagonalIndependent),
            other => Err(Error::InvalidArgument(format!("unknown smoothing method `{other}`"))),
        }
    }
}

/// Blocked-order information matrix plus the sites whose local block had
/// to be lifted to the eigenvalue floor.
#[derive(Debug, Clone)]
pub struct AssembledInformation<T> {
    pub matrix: SparseSym<T>,
    pub floored_sites: Vec<usize>,
}

/// Posterior summaries of a smoothed field, all vectors in blocked order.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothResult<T> {
    pub grid: GridSpec,
    pub kind: ModelKind,
    pub posterior_mean: Vec<T>,
    pub posterior_var: Vec<T>,
    pub kappas: Vec<T>,
    pub method: SmoothMethod,
    /// Sites whose information block was projected to the PSD floor.
    pub floored_sites: Vec<usize>,
}

impl<T: Real> SmoothResult<T> {
    pub fn n_sites(&self) -> usize {
        self.grid.n_sites()
    }

    pub fn mean_field(&self, m: usize) -> &[T] {
        let s = self.n_sites();
        &self.posterior_mean[m * s..(m + 1) * s]
    }

    pub fn var_field(&self, m: usize) -> &[T] {
        let s = self.n_sites();
        &self.posterior_var[m * s..(m + 1) * s]
    }

    /// Smoothed parameter vector at one site.
    pub fn theta_at(&self, site: usize) -> Vec<T> {
        (0..self.kind.n_params()).map(|m| self.mean_field(m)[site]).collect()
    }
}

/// Permute the local information blocks into one sparse block matrix.
pub fn assemble_information<T: Real>(
    field: &MleField<T>,
    ordering: &ParamOrdering,
) -> Result<AssembledInformation<T>> {
    let p = field.n_params();
    if *ordering != ParamOrdering::for_field(field) {
        return Err(Error::Dimension("ordering does not match the MLE field".into()));
    }
    let mut trip = Vec::with_capacity(field.fits.len() * p * p);
    let mut floored_sites = Vec::new();
    for (s, fit) in field.fits.iter().enumerate() {
        if fit.info.len() != p * p || fit.info.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "missing or non-finite information matrix at grid point s={s}"
            )));
        }
        let (block, lifted) = psd_floor(&fit.info, p, T::lit(BLOCK_EIGEN_FLOOR));
        if lifted || fit.info_floored {
            floored_sites.push(s);
        }
        for r in 0..p {
            for c in 0..p {
                let v = block[r * p + c];
                if v != T::zero() {
                    trip.push((ordering.blocked(s, r), ordering.blocked(s, c), v));
                }
            }
        }
    }
    let n = ordering.len();
    Ok(AssembledInformation {
        matrix: SparseSym::new(CscMatrix::from_triplets(n, n, trip)?)?,
        floored_sites,
    })
}

/// Factor `Q + J`, reusing `symbolic` when given and compatible.
pub(crate) fn factor_posterior_precision<T: Real>(
    q: &SparseSym<T>,
    j: &SparseSym<T>,
    symbolic: Option<&CholeskySymbolic>,
) -> Result<CholeskyFactor<T>> {
    let a = q.add(j)?;
    let symbolic = match symbolic {
        Some(sym) if sym.dim() == a.dim() => sym.clone(),
        _ => CholeskySymbolic::analyze(&a),
    };
    CholeskyFactor::factor(symbolic, &a)
}

fn posterior_rhs<T: Real>(q: &SparseSym<T>, j: &SparseSym<T>, theta_hat: &[T], prior_mean: &[T]) -> Result<Vec<T>> {
    let jt = j.matvec(theta_hat)?;
    if prior_mean.iter().all(|v| *v == T::zero()) {
        return Ok(jt);
    }
    let qm = q.matvec(prior_mean)?;
    Ok(jt.into_iter().zip(qm).map(|(a, b)| a + b).collect())
}

/// Posterior mean `(Q + J)⁻¹ (Q μ + J θ̂)`.
pub fn posterior_mean<T: Real>(
    q: &SparseSym<T>,
    j: &SparseSym<T>,
    theta_hat: &[T],
    prior_mean: &[T],
) -> Result<Vec<T>> {
    let factor = factor_posterior_precision(q, j, None)?;
    factor.solve(&posterior_rhs(q, j, theta_hat, prior_mean)?)
}

/// Marginal posterior variances `diag((Q + J)⁻¹)`.
pub fn posterior_marginal_variance<T: Real>(q: &SparseSym<T>, j: &SparseSym<T>) -> Result<Vec<T>> {
    Ok(factor_posterior_precision(q, j, None)?.diagonal_of_inverse())
}

/// `J̃ = [diag(Ĵ⁻¹)]⁻¹`, computed block by block.
pub fn diagonal_approximation<T: Real>(j: &SparseSym<T>, ordering: &ParamOrdering) -> Result<SparseSym<T>> {
    let p = ordering.n_params;
    if j.dim() != ordering.len() {
        return Err(Error::Dimension("information matrix does not match ordering".into()));
    }
    let mut diag = vec![T::zero(); ordering.len()];
    for s in 0..ordering.n_sites {
        let mut block = vec![T::zero(); p * p];
        for r in 0..p {
            for c in 0..p {
                block[r * p + c] = j.get(ordering.blocked(s, r), ordering.blocked(s, c));
            }
        }
        let inv = inverse(&block, p).ok_or(Error::SingularBlock { site: s })?;
        for m in 0..p {
            let d = inv[m * p + m];
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::SingularBlock { site: s });
            }
            diag[ordering.blocked(s, m)] = T::one() / d;
        }
    }
    Ok(SparseSym::from_diagonal(&diag))
}

/// Copy of `field` whose information blocks are replaced by the diagonal
/// approximation `J̃_s`.
pub fn diagonal_field<T: Real>(field: &MleField<T>) -> Result<MleField<T>> {
    let ordering = ParamOrdering::for_field(field);
    let info = assemble_information(field, &ordering)?;
    let jt = diagonal_approximation(&info.matrix, &ordering)?.diagonal();
    let p = field.n_params();
    let mut out = field.clone();
    for (s, fit) in out.fits.iter_mut().enumerate() {
        fit.info = vec![T::zero(); p * p];
        for m in 0..p {
            fit.info[m * p + m] = jt[ordering.blocked(s, m)];
        }
    }
    Ok(out)
}

fn map_pd_error(e: Error, ordering: &ParamOrdering) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, value } => {
            let (site, param) = ordering.locate_blocked(pivot);
            Error::PosteriorNotPositiveDefinite { site, param, value }
        }
        other => other,
    }
}

fn check_prior<T: Real>(field: &MleField<T>, prior: &PriorSpec<T>) -> Result<()> {
    prior.validate()?;
    if prior.n_params() != field.n_params() {
        return Err(Error::Dimension(format!(
            "{} precision parameters for a {}-parameter model",
            prior.n_params(),
            field.n_params()
        )));
    }
    if prior.structure.grid != field.grid {
        return Err(Error::Dimension("prior and MLE field use different grids".into()));
    }
    Ok(())
}

/// Joint smoothing with the full information blocks.
pub fn smooth_full<T: Real>(field: &MleField<T>, prior: &PriorSpec<T>) -> Result<SmoothResult<T>> {
    check_prior(field, prior)?;
    let ordering = ParamOrdering::for_field(field);
    let info = assemble_information(field, &ordering)?;
    let q = assemble_q(prior)?;
    let factor = factor_posterior_precision(&q, &info.matrix, None).map_err(|e| map_pd_error(e, &ordering))?;
    let rhs = posterior_rhs(&q, &info.matrix, &field.theta_blocked(), &prior.prior_mean)?;
    Ok(SmoothResult {
        grid: field.grid.clone(),
        kind: field.kind,
        posterior_mean: factor.solve(&rhs)?,
        posterior_var: factor.diagonal_of_inverse(),
        kappas: prior.kappas.clone(),
        method: SmoothMethod::Full,
        floored_sites: info.floored_sites,
    })
}

/// Per-parameter smoothing with the diagonal information approximation.
pub fn smooth_independent<T: Real>(field: &MleField<T>, prior: &PriorSpec<T>) -> Result<SmoothResult<T>> {
    check_prior(field, prior)?;
    let ordering = ParamOrdering::for_field(field);
    let info = assemble_information(field, &ordering)?;
    let jt = diagonal_approximation(&info.matrix, &ordering)?.diagonal();
    let theta = field.theta_blocked();
    let n = ordering.n_sites;
    let r = &prior.structure.r;
    let mut mean = Vec::with_capacity(ordering.len());
    let mut var = Vec::with_capacity(ordering.len());
    let mut symbolic: Option<CholeskySymbolic> = None;
    for (m, &kappa) in prior.kappas.iter().enumerate() {
        let range = m * n..(m + 1) * n;
        let qm = block_precision(r, &[kappa])?;
        let jm = SparseSym::from_diagonal(&jt[range.clone()]);
        let factor = factor_posterior_precision(&qm, &jm, symbolic.as_ref()).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot, value } => Error::PosteriorNotPositiveDefinite {
                site: pivot,
                param: m,
                value,
            },
            other => other,
        })?;
        let rhs = posterior_rhs(&qm, &jm, &theta[range.clone()], &prior.prior_mean[range])?;
        mean.extend(factor.solve(&rhs)?);
        var.extend(factor.diagonal_of_inverse());
        symbolic = Some(factor.symbolic().clone());
    }
    Ok(SmoothResult {
        grid: field.grid.clone(),
        kind: field.kind,
        posterior_mean: mean,
        posterior_var: var,
        kappas: prior.kappas.clone(),
        method: SmoothMethod::DiagonalIndependent,
        floored_sites: info.floored_sites,
    })
}

pub fn smooth<T: Real>(field: &MleField<T>, prior: &PriorSpec<T>, method: SmoothMethod) -> Result<SmoothResult<T>> {
    match method {
        SmoothMethod::Full => smooth_full(field, prior),
        SmoothMethod::DiagonalIndependent => smooth_independent(field, prior),
    }
}

#[cfg(test)]
mod tests;
