//! Local postprocessing models fitted independently at every grid point:
//! MOS (closed form), logistic regression and NGR (numerical, ridge
//! penalized), with observed information matrices.

mod field_io;
mod logreg;
mod mos;
mod ngr;

pub use field_io::{read_mle_field, write_mle_field, ESTIMATE_HEADER, INFO_HEADER};
pub use logreg::{logreg_loglik, logreg_prob, logreg_score, fit_logreg_site};
pub use mos::{fit_mos_site, mos_loglik};
pub use ngr::{fit_ngr_site, ngr_loglik, ngr_predict, ngr_score};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_data::{BinaryDataset, EnsembleDataset, EnsembleSummary, GridSpec};
use crate::scalar::Real;

/// Postprocessing model; fixes the parameter count and order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// `(α, β, τ)`: `y ~ N(α + β(m − m̄), e^τ)`.
    Mos,
    /// `(α, β)`: `P(y = 1) = logistic(α + β m)`.
    Logreg,
    /// `(α, β, γ, δ)`: `y ~ N(α + β m, e^γ + e^δ v)`.
    Ngr,
}

impl ModelKind {
    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Mos => &["alpha", "beta", "tau"],
            ModelKind::Logreg => &["alpha", "beta"],
            ModelKind::Ngr => &["alpha", "beta", "gamma", "delta"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mos => "mos",
            ModelKind::Logreg => "logreg",
            ModelKind::Ngr => "ngr",
        }
    }

    /// Infer the model from an ordered list of parameter names.
    pub fn from_param_names(names: &[String]) -> Result<Self> {
        [ModelKind::Mos, ModelKind::Logreg, ModelKind::Ngr]
            .into_iter()
            .find(|k| k.param_names().iter().copied().eq(names.iter().map(String::as_str)))
            .ok_or_else(|| Error::Schema(format!("unrecognised parameter set {names:?}")))
    }

    pub fn is_binary(self) -> bool {
        self == ModelKind::Logreg
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mos" => Ok(ModelKind::Mos),
            "logreg" | "lr" => Ok(ModelKind::Logreg),
            "ngr" => Ok(ModelKind::Ngr),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

/// Result of one local fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit<T> {
    /// `θ̂_s`, in the model's parameter order.
    pub theta_hat: Vec<T>,
    /// Observed information `Ĵ_s`, row-major `p × p`, symmetric.
    pub info: Vec<T>,
    pub converged: bool,
    /// Unpenalized log-likelihood at `θ̂_s`.
    pub loglik: T,
    /// Information had eigenvalues below the floor and was projected.
    pub info_floored: bool,
    /// NGR only: ensemble variance identically zero at this site.
    pub degenerate_variance: bool,
}

impl<T: Real> LocalFit<T> {
    pub fn n_params(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn info_entry(&self, r: usize, c: usize) -> T {
        self.info[r * self.n_params() + c]
    }
}

/// MLEs and information matrices at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MleField<T> {
    pub grid: GridSpec,
    pub kind: ModelKind,
    pub fits: Vec<LocalFit<T>>,
}

impl<T: Real> MleField<T> {
    pub fn new(grid: GridSpec, kind: ModelKind, fits: Vec<LocalFit<T>>) -> Result<Self> {
        let p = kind.n_params();
        if fits.len() != grid.n_sites() {
            return Err(Error::Dimension(format!(
                "{} local fits for {} grid points",
                fits.len(),
                grid.n_sites()
            )));
        }
        if let Some(s) = fits
            .iter()
            .position(|f| f.theta_hat.len() != p || f.info.len() != p * p)
        {
            return Err(Error::Dimension(format!(
                "local fit at s={s} does not have {p} parameters"
            )));
        }
        Ok(Self { grid, kind, fits })
    }

    pub fn n_params(&self) -> usize {
        self.kind.n_params()
    }

    pub fn n_sites(&self) -> usize {
        self.fits.len()
    }

    /// Field of parameter `m` over all sites.
    pub fn param_field(&self, m: usize) -> Vec<T> {
        self.fits.iter().map(|f| f.theta_hat[m]).collect()
    }

    /// `θ̂` in blocked order `(α_1..α_S, β_1..β_S, …)`.
    pub fn theta_blocked(&self) -> Vec<T> {
        (0..self.n_params()).flat_map(|m| self.param_field(m)).collect()
    }

    pub fn n_converged(&self) -> usize {
        self.fits.iter().filter(|f| f.converged).count()
    }

    /// Convert the scalar type.
    pub fn cast<U: Real>(&self) -> MleField<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect();
        MleField {
            grid: self.grid.clone(),
            kind: self.kind,
            fits: self
                .fits
                .iter()
                .map(|f| LocalFit {
                    theta_hat: conv(&f.theta_hat),
                    info: conv(&f.info),
                    converged: f.converged,
                    loglik: U::lit(f.loglik.as_f64()),
                    info_floored: f.info_floored,
                    degenerate_variance: f.degenerate_variance,
                })
                .collect(),
        }
    }
}

/// L2 penalty `−½ · weight · Σ θ_m²` added to the log-likelihood of the
/// numerically fitted models.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    pub weight: f64,
    /// Penalized parameter indices; `None` penalizes all parameters.
    pub applied_to: Option<Vec<usize>>,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            weight: 1e-4,
            applied_to: None,
        }
    }
}

impl RidgeConfig {
    pub fn none() -> Self {
        Self {
            weight: 0.0,
            applied_to: None,
        }
    }

    pub fn with_weight(weight: f64) -> Self {
        Self {
            weight,
            applied_to: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ridge weight must be finite and non-negative, got {}",
                self.weight
            )));
        }
        Ok(())
    }

    fn applies(&self, m: usize) -> bool {
        self.applied_to.as_ref().map_or(true, |set| set.contains(&m))
    }

    /// Penalty subtracted from the log-likelihood.
    pub fn penalty(&self, theta: &[f64]) -> f64 {
        0.5 * self.weight
            * theta
                .iter()
                .enumerate()
                .filter(|(m, _)| self.applies(*m))
                .map(|(_, t)| t * t)
                .sum::<f64>()
    }

    /// Gradient of [`RidgeConfig::penalty`].
    pub fn penalty_gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(m, t)| if self.applies(m) { self.weight * t } else { 0.0 })
            .collect()
    }
}

/// Settings for the numerical local fits.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub ridge: RidgeConfig,
    /// Seed for jittered restarts; combined with the site index.
    pub seed: u64,
    pub max_restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ridge: RidgeConfig::default(),
            seed: 0,
            max_restarts: 3,
        }
    }
}

/// Per-site inputs of a local model over the training times.
#[derive(Debug, Clone, Copy)]
pub struct SiteData<'a> {
    /// Observations, or 0/1 event indicators for logistic regression.
    pub y: ArrayView1<'a, f64>,
    /// Ensemble mean.
    pub m: ArrayView1<'a, f64>,
    /// Ensemble variance (unused by MOS and logistic regression).
    pub v: ArrayView1<'a, f64>,
}

impl SiteData<'_> {
    pub fn n_times(&self) -> usize {
        self.y.len()
    }

    pub fn m_bar(&self) -> f64 {
        self.m.sum() / self.m.len() as f64
    }
}

/// Model inputs on the whole grid: observations (or events), ensemble
/// mean and ensemble variance, all indexed `[s, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub kind: ModelKind,
    pub grid: GridSpec,
    pub times: Vec<String>,
    pub y: Array2<f64>,
    pub m: Array2<f64>,
    pub v: Array2<f64>,
}

impl ModelData {
    /// Gaussian models from a summary and observations.
    pub fn gaussian(
        kind: ModelKind,
        grid: GridSpec,
        times: Vec<String>,
        summary: &EnsembleSummary,
        obs: &Array2<f64>,
    ) -> Result<Self> {
        if kind.is_binary() {
            return Err(Error::InvalidArgument(
                "logistic regression needs a binary dataset".into(),
            ));
        }
        if summary.mean.dim() != obs.dim() || obs.nrows() != grid.n_sites() {
            return Err(Error::Dimension("summary and observations disagree".into()));
        }
        Ok(Self {
            kind,
            grid,
            times,
            y: obs.clone(),
            m: summary.mean.clone(),
            v: summary.variance.clone(),
        })
    }

    pub fn binary(data: &BinaryDataset) -> Self {
        Self {
            kind: ModelKind::Logreg,
            grid: data.grid.clone(),
            times: data.times.clone(),
            y: data.events.mapv(f64::from),
            m: data.covariate.clone(),
            v: Array2::zeros(data.covariate.dim()),
        }
    }

    /// Build from an ensemble dataset; `threshold` is used for logistic
    /// regression only.
    pub fn from_ensemble(kind: ModelKind, data: &EnsembleDataset, threshold: f64) -> Result<Self> {
        match kind {
            ModelKind::Logreg => Ok(Self::binary(&crate::grid_data::binarize(data, threshold)?)),
            _ => {
                let summary = crate::grid_data::summarize_ensemble(data)?;
                Self::gaussian(kind, data.grid.clone(), data.times.clone(), &summary, &data.observations)
            }
        }
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_sites(&self) -> usize {
        self.grid.n_sites()
    }

    pub fn site(&self, s: usize) -> SiteData<'_> {
        SiteData {
            y: self.y.row(s),
            m: self.m.row(s),
            v: self.v.row(s),
        }
    }

    pub fn select_times(&self, idx: &[usize]) -> Self {
        Self {
            kind: self.kind,
            grid: self.grid.clone(),
            times: idx.iter().map(|&t| self.times[t].clone()).collect(),
            y: self.y.select(Axis(1), idx),
            m: self.m.select(Axis(1), idx),
            v: self.v.select(Axis(1), idx),
        }
    }

    /// Time-averaged ensemble mean per site.
    pub fn m_bar(&self) -> Vec<f64> {
        (0..self.n_sites()).map(|s| self.site(s).m_bar()).collect()
    }
}

/// Fit the local model at a single site.
pub fn fit_site(kind: ModelKind, site: SiteData<'_>, s: usize, config: &FitConfig) -> Result<LocalFit<f64>> {
    match kind {
        ModelKind::Mos => fit_mos_site(site, s),
        ModelKind::Logreg => Ok(fit_logreg_site(site, s, config)),
        ModelKind::Ngr => Ok(fit_ngr_site(site, s, config)),
    }
}

/// Fit every grid point independently (in parallel); deterministic for a
/// given `config.seed`.
pub fn fit_field(data: &ModelData, config: &FitConfig) -> Result<MleField<f64>> {
    config.ridge.validate()?;
    let min_t = match data.kind {
        ModelKind::Mos => 3,
        _ => 2,
    };
    if data.n_times() < min_t {
        return Err(Error::InvalidArgument(format!(
            "{} needs at least {min_t} verification times, got {}",
            data.kind,
            data.n_times()
        )));
    }
    let fits = (0..data.n_sites())
        .into_par_iter()
        .map(|s| fit_site(data.kind, data.site(s), s, config))
        .collect::<Result<Vec<_>>>()?;
    MleField::new(data.grid.clone(), data.kind, fits)
}

/// MOS closed-form fit on every grid point. The ridge setting is accepted
/// for interface symmetry; MOS keeps its exact unpenalized estimator.
pub fn fit_mos(
    grid: &GridSpec,
    summary: &EnsembleSummary,
    obs: &Array2<f64>,
    _ridge: &RidgeConfig,
) -> Result<MleField<f64>> {
    let times = (0..obs.ncols()).map(|t| t.to_string()).collect();
    let data = ModelData::gaussian(ModelKind::Mos, grid.clone(), times, summary, obs)?;
    fit_field(&data, &FitConfig::default())
}

pub fn fit_logreg(data: &BinaryDataset, ridge: &RidgeConfig) -> Result<MleField<f64>> {
    fit_field(
        &ModelData::binary(data),
        &FitConfig {
            ridge: ridge.clone(),
            ..FitConfig::default()
        },
    )
}

pub fn fit_ngr(
    grid: &GridSpec,
    summary: &EnsembleSummary,
    obs: &Array2<f64>,
    ridge: &RidgeConfig,
) -> Result<MleField<f64>> {
    let times = (0..obs.ncols()).map(|t| t.to_string()).collect();
    let data = ModelData::gaussian(ModelKind::Ngr, grid.clone(), times, summary, obs)?;
    fit_field(
        &data,
        &FitConfig {
            ridge: ridge.clone(),
            ..FitConfig::default()
        },
    )
}

/// Gradient of the penalized log-likelihood that the local fit maximizes.
pub fn penalized_score(kind: ModelKind, site: SiteData<'_>, theta: &[f64], ridge: &RidgeConfig) -> Vec<f64> {
    let mut g = match kind {
        ModelKind::Mos => mos::mos_score(site, theta),
        ModelKind::Logreg => logreg_score(theta, site),
        ModelKind::Ngr => ngr_score(theta, site),
    };
    if kind != ModelKind::Mos {
        for (gi, pi) in g.iter_mut().zip(ridge.penalty_gradient(theta)) {
            *gi -= pi;
        }
    }
    g
}

/// Unpenalized log-likelihood of any model at one site.
pub fn site_loglik(kind: ModelKind, site: SiteData<'_>, theta: &[f64]) -> f64 {
    match kind {
        ModelKind::Mos => mos_loglik(theta, site.y, site.m, site.m_bar()),
        ModelKind::Logreg => logreg_loglik(theta, site.y, site.m),
        ModelKind::Ngr => ngr_loglik(theta, site.y, site.m, site.v),
    }
}

/// Predictive distribution of a fitted local model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction<T> {
    Normal { mu: T, sigma: T },
    Probability(T),
}

/// Predict at covariates `(m, v)`; `m_bar` is the training-period mean of
/// the ensemble mean, used by MOS centering.
pub fn predict<T: Real>(kind: ModelKind, theta: &[T], m: T, v: T, m_bar: T) -> Prediction<T> {
    match kind {
        ModelKind::Mos => Prediction::Normal {
            mu: theta[0] + theta[1] * (m - m_bar),
            sigma: (theta[2] * T::lit(0.5)).exp(),
        },
        ModelKind::Logreg => Prediction::Probability(logreg_prob(theta, m)),
        ModelKind::Ngr => {
            let (mu, sigma) = ngr_predict(theta, m, v);
            Prediction::Normal { mu, sigma }
        }
    }
}

/// Deterministic per-site RNG for jittered restarts.
pub(crate) fn site_rng(seed: u64, site: usize) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site as u64 + 1);
    rng
}

/// Tolerance on the sup-norm of the penalized score, per observation.
pub const SCORE_TOLERANCE: f64 = 1e-7;

/// Convergence test on a penalized score: `‖g‖_∞ ≤ 1e-7 · max(1, T)`.
pub fn gradient_converged(g: &[f64], n_obs: usize) -> bool {
    let scale = (n_obs as f64).max(1.0);
    g.iter().all(|x| x.abs() <= SCORE_TOLERANCE * scale)
}

/// Run simplex then quasi-Newton on `objective` (to be minimized), with
/// jittered restarts if the final gradient is not small.
pub(crate) fn minimize_local(
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    n_obs: usize,
    site: usize,
    config: &FitConfig,
) -> (Vec<f64>, bool) {
    use crate::optim::{bfgs, nelder_mead, BfgsOptions, NelderMeadOptions};
    use rand_distr::{Distribution, Normal};

    let nm_opts = NelderMeadOptions {
        max_iter: 2000,
        f_tol: 1e-10,
        x_tol: 1e-6,
    };
    let bfgs_opts = BfgsOptions {
        max_iter: 500,
        g_tol: 1e-9,
    };
    let mut rng = site_rng(config.seed, site);
    let jitter = Normal::new(0.0, 0.5).expect("valid normal");
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut start = x0.to_vec();

    for attempt in 0..=config.max_restarts {
        if attempt > 0 {
            let base = best.as_ref().map_or(x0, |b| b.0.as_slice()).to_vec();
            start = base.iter().map(|b| b + jitter.sample(&mut rng)).collect();
        }
        let step: Vec<f64> = start.iter().map(|x| 0.1 * x.abs().max(1.0)).collect();
        let nm = nelder_mead(&objective, &start, &step, &nm_opts);
        let x_nm = if nm.f.is_finite() { nm.x } else { start.clone() };
        let q = bfgs(&objective, &gradient, &x_nm, &bfgs_opts);
        let ok = q.f.is_finite() && gradient_converged(&gradient(&q.x), n_obs);
        let better = best.as_ref().map_or(true, |b| (ok && !b.2) || (ok == b.2 && q.f < b.1));
        if better {
            best = Some((q.x, q.f, ok));
        }
        if ok {
            break;
        }
    }
    let (x, _, ok) = best.expect("at least one attempt");
    (x, ok)
}
