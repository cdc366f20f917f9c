//! Empirical-Bayes estimation of the prior precisions `κ`.
//!
//! The objective is the log marginal posterior of `κ` under the Gaussian
//! approximation, with `θ* = (Q_θ + Ĵ)⁻¹ Ĵ θ̂`:
//!
//! `−½(θ̂−θ*)′Ĵ(θ̂−θ*) + ½(S−1)Σ log κ_m − ½θ*′Q_θθ* − rate·Σκ_m − ½ log det(Q_θ+Ĵ)`.
//!
//! κ-independent constants are dropped, so values are comparable only
//! within one problem.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_data::csv_io::csv_writer;
use crate::likelihoods::MleField;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::scalar::Real;
use crate::smoother::{assemble_information, factor_posterior_precision, ParamOrdering};
use crate::spatial_prior::{block_precision, logdet_generalized, Rw2dStructure};
use crate::sparse_linalg::{CholeskySymbolic, SparseSym};

/// Independent exponential priors on every `κ_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaPrior<T> {
    pub rate: T,
}

impl<T: Real> Default for KappaPrior<T> {
    fn default() -> Self {
        Self { rate: T::lit(5e-5) }
    }
}

impl<T: Real> KappaPrior<T> {
    pub fn new(rate: T) -> Result<Self> {
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!("prior rate must be positive, got {rate}")));
        }
        Ok(Self { rate })
    }

    /// `log p(κ)` without the constant `p·log(rate)`.
    pub fn log_density(&self, kappas: &[T]) -> T {
        -self.rate * kappas.iter().copied().sum::<T>()
    }
}

/// Search settings in `log κ` coordinates.
#[derive(Debug, Clone)]
pub struct KappaSearch<T> {
    pub lower: T,
    pub upper: T,
    pub start: T,
    /// Starting `log κ` vector; overrides `start` when set.
    pub initial: Option<Vec<T>>,
    /// Initial simplex edge length in `log κ`.
    pub step: T,
    pub restarts: usize,
    pub simplex: NelderMeadOptions<T>,
}

impl<T: Real> Default for KappaSearch<T> {
    fn default() -> Self {
        Self {
            lower: T::lit(-10.0),
            upper: T::lit(25.0),
            start: T::lit(5.0),
            initial: None,
            step: T::one(),
            restarts: 2,
            simplex: NelderMeadOptions {
                max_iter: 1000,
                f_tol: T::lit(1.49e-8),
                x_tol: T::lit(1e-2),
            },
        }
    }
}

/// One accepted optimizer iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<T> {
    pub step: usize,
    pub log_kappa: Vec<T>,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperEstimate<T> {
    pub kappa_hat: Vec<T>,
    pub objective_value: T,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceStep<T>>,
}

/// Objective value together with the posterior mean it was computed from.
#[derive(Debug, Clone)]
pub struct KappaEvaluation<T> {
    pub objective: T,
    pub theta_star: Vec<T>,
}

/// Data of a κ estimation problem: the structure matrix, the blocked
/// information matrix and the MLEs. The sparsity analysis of `Q_θ + Ĵ` is
/// done once and reused for every κ.
#[derive(Debug, Clone)]
pub struct KappaProblem<T> {
    r: SparseSym<T>,
    j: SparseSym<T>,
    theta_hat: Vec<T>,
    n_params: usize,
    n_sites: usize,
    symbolic: CholeskySymbolic,
}

impl<T: Real> KappaProblem<T> {
    pub fn new(r: SparseSym<T>, j: SparseSym<T>, theta_hat: Vec<T>, n_params: usize) -> Result<Self> {
        let n_sites = r.dim();
        if j.dim() != n_params * n_sites || theta_hat.len() != j.dim() {
            return Err(Error::Dimension(format!(
                "information of dimension {} and {} estimates for {n_params} parameters on {n_sites} sites",
                j.dim(),
                theta_hat.len()
            )));
        }
        let ones = vec![T::one(); n_params];
        let symbolic = CholeskySymbolic::analyze(&block_precision(&r, &ones)?.add(&j)?);
        Ok(Self {
            r,
            j,
            theta_hat,
            n_params,
            n_sites,
            symbolic,
        })
    }

    pub fn from_field(field: &MleField<T>, structure: &Rw2dStructure<T>) -> Result<Self> {
        if structure.grid != field.grid {
            return Err(Error::Dimension("structure and MLE field use different grids".into()));
        }
        let ordering = ParamOrdering::for_field(field);
        let j = assemble_information(field, &ordering)?.matrix;
        Self::new(structure.r.clone(), j, field.theta_blocked(), field.n_params())
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn information(&self) -> &SparseSym<T> {
        &self.j
    }

    pub fn theta_hat(&self) -> &[T] {
        &self.theta_hat
    }

    /// Objective and `θ*` at `kappas`; fails if `Q_θ + Ĵ` is not positive
    /// definite.
    pub fn evaluate(&self, kappas: &[T], prior: &KappaPrior<T>) -> Result<KappaEvaluation<T>> {
        if kappas.len() != self.n_params {
            return Err(Error::Dimension(format!("expected {} precisions", self.n_params)));
        }
        if kappas.iter().any(|k| !(*k > T::zero()) || !k.is_finite()) {
            return Err(Error::InvalidArgument("precisions must be positive and finite".into()));
        }
        let q = block_precision(&self.r, kappas)?;
        let factor = factor_posterior_precision(&q, &self.j, Some(&self.symbolic))?;
        let theta_star = factor.solve(&self.j.matvec(&self.theta_hat)?)?;
        let resid: Vec<T> = self.theta_hat.iter().zip(&theta_star).map(|(a, b)| *a - *b).collect();
        let half = T::lit(0.5);
        let objective = -half * self.j.quad_form(&resid)?
            + half * logdet_generalized(self.n_sites, kappas)
            - half * q.quad_form(&theta_star)?
            + prior.log_density(kappas)
            - half * factor.log_det();
        Ok(KappaEvaluation { objective, theta_star })
    }

    /// Objective with `−∞` for non-positive-definite or invalid `κ`.
    pub fn objective(&self, kappas: &[T], prior: &KappaPrior<T>) -> T {
        self.evaluate(kappas, prior)
            .map(|e| e.objective)
            .unwrap_or_else(|_| T::neg_infinity())
    }

    /// The same objective assembled at an arbitrary `θ`:
    /// `log p(θ̂|θ) + log p(θ|κ) + log p(κ) − log p(θ|θ̂, κ)` with the
    /// Gaussian approximations; independent of `θ` up to rounding.
    pub fn objective_at_theta(&self, kappas: &[T], prior: &KappaPrior<T>, theta: &[T]) -> Result<T> {
        let eval = self.evaluate(kappas, prior)?;
        let q = block_precision(&self.r, kappas)?;
        let a = q.add(&self.j)?;
        let d_hat: Vec<T> = self.theta_hat.iter().zip(theta).map(|(a, b)| *a - *b).collect();
        let d_star: Vec<T> = theta.iter().zip(&eval.theta_star).map(|(a, b)| *a - *b).collect();
        let half = T::lit(0.5);
        let factor = factor_posterior_precision(&q, &self.j, Some(&self.symbolic))?;
        Ok(-half * self.j.quad_form(&d_hat)?
            + half * logdet_generalized(self.n_sites, kappas)
            - half * q.quad_form(theta)?
            + prior.log_density(kappas)
            - half * factor.log_det()
            + half * a.quad_form(&d_star)?)
    }
}

/// Objective at `kappa` for an MLE field (`−∞` on failure).
pub fn kappa_objective<T: Real>(
    kappa: &[T],
    field: &MleField<T>,
    structure: &Rw2dStructure<T>,
    prior: &KappaPrior<T>,
) -> Result<T> {
    Ok(KappaProblem::from_field(field, structure)?.objective(kappa, prior))
}

/// Maximize the objective over `log κ` inside the search box.
pub fn estimate_kappa<T: Real>(
    field: &MleField<T>,
    structure: &Rw2dStructure<T>,
    prior: &KappaPrior<T>,
) -> Result<HyperEstimate<T>> {
    let problem = KappaProblem::from_field(field, structure)?;
    estimate_kappa_with(&problem, prior, &KappaSearch::default())
}

pub fn estimate_kappa_with<T: Real>(
    problem: &KappaProblem<T>,
    prior: &KappaPrior<T>,
    search: &KappaSearch<T>,
) -> Result<HyperEstimate<T>> {
    let p = problem.n_params();
    let neg = |x: &[T]| {
        if x.iter().any(|v| *v < search.lower || *v > search.upper) {
            return T::infinity();
        }
        let kappas: Vec<T> = x.iter().map(|v| v.exp()).collect();
        -problem.objective(&kappas, prior)
    };
    let mut start = match &search.initial {
        Some(x) if x.len() == p => x.clone(),
        Some(_) => return Err(Error::Dimension(format!("initial log κ must have {p} entries"))),
        None => vec![search.start; p],
    };
    let step = vec![search.step; p];
    let mut trace: Vec<TraceStep<T>> = Vec::new();
    let mut best: Option<(Vec<T>, T, bool)> = None;
    let mut iterations = 0;
    for _ in 0..=search.restarts {
        let run = nelder_mead(neg, &start, &step, &search.simplex);
        iterations += run.iterations;
        for (x, f) in &run.trace {
            if f.is_finite() {
                trace.push(TraceStep {
                    step: trace.len(),
                    log_kappa: x.clone(),
                    objective: -*f,
                });
            }
        }
        let improved = best.as_ref().map_or(true, |b| run.f < b.1);
        if improved && run.f.is_finite() {
            best = Some((run.x.clone(), run.f, run.converged));
        } else if let Some(b) = best.as_mut() {
            b.2 |= run.converged;
        }
        start = best.as_ref().map_or(start, |b| b.0.clone());
    }
    let Some((x, f, converged)) = best else {
        return Err(Error::Optimization(format!(
            "no finite objective value found for log κ in [{}, {}] after {} starts",
            search.lower,
            search.upper,
            search.restarts + 1
        )));
    };
    Ok(HyperEstimate {
        kappa_hat: x.iter().map(|v| v.exp()).collect(),
        objective_value: -f,
        iterations,
        converged,
        trace,
    })
}

#[derive(Serialize)]
struct TraceRow<'a> {
    step: usize,
    param: &'a str,
    log_kappa: String,
    objective: String,
}

/// Write `kappa_trace.csv` (`step,param,log_kappa,objective`).
pub fn write_kappa_trace<T: Real>(estimate: &HyperEstimate<T>, params: &[&str], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "param", "log_kappa", "objective"])?;
    for t in &estimate.trace {
        for (m, lk) in t.log_kappa.iter().enumerate() {
            w.serialize(TraceRow {
                step: t.step,
                param: params.get(m).copied().unwrap_or("?"),
                log_kappa: format!("{:.16e}", lk.as_f64()),
                objective: format!("{:.16e}", t.objective.as_f64()),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the traces of separate one-parameter searches, one per parameter,
/// in the `kappa_trace.csv` layout.
pub fn write_independent_kappa_trace<T: Real>(
    estimates: &[HyperEstimate<T>],
    params: &[&str],
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "param", "log_kappa", "objective"])?;
    for (m, est) in estimates.iter().enumerate() {
        for t in &est.trace {
            w.serialize(TraceRow {
                step: t.step,
                param: params.get(m).copied().unwrap_or("?"),
                log_kappa: format!("{:.16e}", t.log_kappa[0].as_f64()),
                objective: format!("{:.16e}", t.objective.as_f64()),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
