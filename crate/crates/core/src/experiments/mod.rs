//! Leave-one-out cross-validation, synthetic recovery experiments and the
//! comparison of MLE, smoothed and climatological forecasts.

mod report;
pub mod synth;

pub use report::{write_failures, write_recovery, ComparisonReport, FoldFailure, MethodScores, RecoveryRow};
pub use synth::{synth_generate, write_truth, CovariateSpec, FieldGenerator, SynthDataset, SynthSpec};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::dense;
use crate::error::{Error, Result};
use crate::hyperparams::{estimate_kappa_with, HyperEstimate, KappaPrior, KappaProblem, KappaSearch};
use crate::likelihoods::{fit_field, predict, FitConfig, MleField, ModelData, ModelKind, Prediction};
use crate::smoother::{
    assemble_information, diagonal_approximation, smooth_full, smooth_independent, ParamOrdering, SmoothResult,
};
use crate::spatial_prior::{PriorSpec, Rw2dStructure};
use crate::sparse_linalg::SparseSym;
use crate::verification::{pit, score, ForecastSet, Metric, PitHistogram, ScoreReport};

/// Leave-one-out folds over the verification times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub held_out: usize,
    pub train: Vec<usize>,
}

impl CvPlan {
    pub fn leave_one_out(n_times: usize, seed: u64) -> Result<Self> {
        if n_times < 3 {
            return Err(Error::InvalidArgument(format!(
                "leave-one-out needs at least 3 verification times, got {n_times}"
            )));
        }
        let folds = (0..n_times)
            .map(|t| Fold {
                held_out: t,
                train: (0..n_times).filter(|&u| u != t).collect(),
            })
            .collect();
        Ok(Self { folds, seed })
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Forecasting method compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Local maximum likelihood estimates.
    Mle,
    /// Max-and-Smooth with full information blocks.
    MaxSmooth,
    /// Max-and-Smooth with the diagonal information approximation.
    Independent,
    /// Training-period climatology at each site.
    Climatology,
    /// MLE mean with the raw ensemble standard deviation as spread
    /// (Gaussian models only).
    MleRawSpread,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mle,
        Method::MaxSmooth,
        Method::Independent,
        Method::Climatology,
        Method::MleRawSpread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::MaxSmooth => "ms",
            Method::Independent => "indep",
            Method::Climatology => "clim",
            Method::MleRawSpread => "mle_raw",
        }
    }

    /// Parse a comma-separated list such as `mle,ms,clim`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("no methods given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Method::Mle),
            "ms" | "full" | "maxsmooth" => Ok(Method::MaxSmooth),
            "indep" | "independent" => Ok(Method::Independent),
            "clim" | "climatology" => Ok(Method::Climatology),
            "mle_raw" => Ok(Method::MleRawSpread),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected mle, ms, indep, clim or mle_raw)"
            ))),
        }
    }
}

/// Settings shared by all folds of an experiment.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub methods: Vec<Method>,
    pub fit: FitConfig,
    pub kappa_prior: KappaPrior<f64>,
    pub kappa_search: KappaSearch<f64>,
    /// Fixed precisions; skips estimation when set.
    pub fixed_kappa: Option<Vec<f64>>,
    pub pit_bins: usize,
    pub seed: u64,
    /// Start each fold's `κ` search from the full-data estimate with a
    /// smaller simplex instead of the default start.
    pub warm_start: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Mle, Method::MaxSmooth, Method::Independent, Method::Climatology],
            fit: FitConfig::default(),
            kappa_prior: KappaPrior::default(),
            kappa_search: KappaSearch::default(),
            fixed_kappa: None,
            pit_bins: 10,
            seed: 0,
            warm_start: false,
        }
    }
}

impl CvConfig {
    pub fn with_methods(mut self, methods: &[Method]) -> Self {
        self.methods = methods.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods requested".into()));
        }
        if kind.is_binary() && self.methods.contains(&Method::MleRawSpread) {
            return Err(Error::InvalidArgument(
                "mle_raw needs a Gaussian model".into(),
            ));
        }
        if let Some(k) = &self.fixed_kappa {
            if k.len() != kind.n_params() || k.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "--kappa needs {} positive values",
                    kind.n_params()
                )));
            }
        }
        if self.pit_bins == 0 {
            return Err(Error::InvalidArgument("PIT needs at least one bin".into()));
        }
        Ok(())
    }
}

/// Climatological forecast per site: `(mean, sd)` for Gaussian models,
/// `(p, 0)` for events.
pub type Climatology = Vec<(f64, f64)>;

/// Event-rate climatology clamped to `[1/(2T), 1 − 1/(2T)]`.
pub fn climatology_forecast(events: &Array2<f64>) -> Result<Vec<f64>> {
    let n_t = events.ncols();
    if n_t == 0 {
        return Err(Error::InvalidArgument("climatology needs at least one training time".into()));
    }
    let lo = 1.0 / (2.0 * n_t as f64);
    Ok(events
        .rows()
        .into_iter()
        .map(|r| (r.sum() / n_t as f64).clamp(lo, 1.0 - lo))
        .collect())
}

fn climatology(data: &ModelData) -> Result<Climatology> {
    if data.kind.is_binary() {
        return Ok(climatology_forecast(&data.y)?.into_iter().map(|p| (p, 0.0)).collect());
    }
    let n = data.n_times() as f64;
    if n < 2.0 {
        return Err(Error::InvalidArgument("Gaussian climatology needs two training times".into()));
    }
    Ok(data
        .y
        .rows()
        .into_iter()
        .map(|r| {
            let mean = r.sum() / n;
            let var = r.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt().max(f64::MIN_POSITIVE))
        })
        .collect())
}

/// Estimated (or fixed) precisions and the posterior for one smoothing
/// variant.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub kappas: Vec<f64>,
    pub result: SmoothResult<f64>,
}

/// Smooth a field with the full information blocks, estimating `κ` unless
/// `fixed` is given.
pub fn max_and_smooth(
    field: &MleField<f64>,
    structure: &Rw2dStructure<f64>,
    prior: &KappaPrior<f64>,
    search: &KappaSearch<f64>,
    fixed: Option<&[f64]>,
) -> Result<Smoothed> {
    let kappas = match fixed {
        Some(k) => k.to_vec(),
        None => {
            let problem = KappaProblem::from_field(field, structure)?;
            estimate_kappa_with(&problem, prior, search)?.kappa_hat
        }
    };
    let spec = PriorSpec::new(structure.clone(), kappas.clone());
    Ok(Smoothed {
        result: smooth_full(field, &spec)?,
        kappas,
    })
}

/// Separate one-parameter `κ` searches on the diagonal information
/// approximation, one per parameter.
pub fn independent_kappas(
    field: &MleField<f64>,
    structure: &Rw2dStructure<f64>,
    prior: &KappaPrior<f64>,
    search: &KappaSearch<f64>,
) -> Result<Vec<HyperEstimate<f64>>> {
    let ordering = ParamOrdering::for_field(field);
    let info = assemble_information(field, &ordering)?;
    let jt = diagonal_approximation(&info.matrix, &ordering)?.diagonal();
    let theta = field.theta_blocked();
    let n = ordering.n_sites;
    (0..field.n_params())
        .map(|m| {
            let search = KappaSearch {
                initial: search.initial.as_ref().map(|x| vec![x[m]]),
                ..search.clone()
            };
            let range = m * n..(m + 1) * n;
            let problem = KappaProblem::new(
                structure.r.clone(),
                SparseSym::from_diagonal(&jt[range.clone()]),
                theta[range].to_vec(),
                1,
            )?;
            estimate_kappa_with(&problem, prior, &search)
        })
        .collect()
}

/// Independent per-parameter smoothing with the diagonal information
/// approximation; each `κ_m` is estimated on its own one-parameter problem.
pub fn independent_smooth(
    field: &MleField<f64>,
    structure: &Rw2dStructure<f64>,
    prior: &KappaPrior<f64>,
    search: &KappaSearch<f64>,
    fixed: Option<&[f64]>,
) -> Result<Smoothed> {
    let kappas = match fixed {
        Some(k) => k.to_vec(),
        None => independent_kappas(field, structure, prior, search)?
            .into_iter()
            .map(|e| e.kappa_hat[0])
            .collect(),
    };
    let spec = PriorSpec::new(structure.clone(), kappas.clone());
    Ok(Smoothed {
        result: smooth_independent(field, &spec)?,
        kappas,
    })
}

/// Everything fitted on one training set.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub mle: MleField<f64>,
    pub smoothed: Option<Smoothed>,
    pub independent: Option<Smoothed>,
    pub climatology: Climatology,
    /// Training mean of the ensemble mean per site (MOS centering).
    pub m_bar: Vec<f64>,
}

/// Simplex edge length for warm-started `κ` searches.
pub const WARM_STEP: f64 = 0.25;

fn warm_search(search: &KappaSearch<f64>, start: Option<&Smoothed>) -> KappaSearch<f64> {
    match start {
        Some(s) => KappaSearch {
            initial: Some(s.kappas.iter().map(|k| k.ln()).collect()),
            step: WARM_STEP,
            ..search.clone()
        },
        None => search.clone(),
    }
}

/// Fit every requested method on `train`; `warm` supplies starting values
/// for the `κ` searches.
pub fn train_models(
    train: &ModelData,
    structure: &Rw2dStructure<f64>,
    config: &CvConfig,
    fit_seed: u64,
    warm: Option<&TrainedModels>,
) -> Result<TrainedModels> {
    let fit = FitConfig {
        seed: fit_seed,
        ..config.fit.clone()
    };
    let mle = fit_field(train, &fit)?;
    let wants = |m: Method| config.methods.contains(&m);
    let fixed = config.fixed_kappa.as_deref();
    let smoothed = if wants(Method::MaxSmooth) {
        let search = warm_search(&config.kappa_search, warm.and_then(|w| w.smoothed.as_ref()));
        Some(max_and_smooth(&mle, structure, &config.kappa_prior, &search, fixed)?)
    } else {
        None
    };
    let independent = if wants(Method::Independent) {
        let search = warm_search(&config.kappa_search, warm.and_then(|w| w.independent.as_ref()));
        Some(independent_smooth(&mle, structure, &config.kappa_prior, &search, fixed)?)
    } else {
        None
    };
    Ok(TrainedModels {
        climatology: climatology(train)?,
        m_bar: train.m_bar(),
        mle,
        smoothed,
        independent,
    })
}

impl TrainedModels {
    /// Parameters used by `method` at `site`; `None` for climatology.
    pub fn theta(&self, method: Method, site: usize) -> Option<Vec<f64>> {
        match method {
            Method::Mle | Method::MleRawSpread => Some(self.mle.fits[site].theta_hat.clone()),
            Method::MaxSmooth => self.smoothed.as_ref().map(|s| s.result.theta_at(site)),
            Method::Independent => self.independent.as_ref().map(|s| s.result.theta_at(site)),
            Method::Climatology => None,
        }
    }

    /// Predictive distribution of `method` at `site` for covariates `(m, v)`.
    pub fn predict(&self, method: Method, site: usize, m: f64, v: f64) -> Result<Prediction<f64>> {
        let kind = self.mle.kind;
        if method == Method::Climatology {
            let (a, b) = self.climatology[site];
            return Ok(if kind.is_binary() {
                Prediction::Probability(a)
            } else {
                Prediction::Normal { mu: a, sigma: b }
            });
        }
        let theta = self
            .theta(method, site)
            .ok_or_else(|| Error::InvalidArgument(format!("method {method} was not trained")))?;
        let pred = predict(kind, &theta, m, v, self.m_bar[site]);
        match (method, pred) {
            (Method::MleRawSpread, Prediction::Normal { mu, .. }) => Ok(Prediction::Normal {
                mu,
                sigma: v.sqrt().max(1e-12),
            }),
            _ => Ok(pred),
        }
    }
}

/// Metrics reported for a model.
pub fn metrics_for(kind: ModelKind) -> &'static [Metric] {
    if kind.is_binary() {
        &[Metric::Brier]
    } else {
        &[Metric::Mse, Metric::LogScore, Metric::Crps]
    }
}

/// Predictions of `method` for the given `(trained models, time)` pairs,
/// assembled into an `[S, n]` forecast set against `data`.
fn forecast_set(data: &ModelData, method: Method, fits: &[(&TrainedModels, usize)]) -> Result<ForecastSet<f64>> {
    let n_s = data.n_sites();
    let n = fits.len();
    let mut a = Array2::zeros((n_s, n));
    let mut b = Array2::zeros((n_s, n));
    let mut y = Array2::zeros((n_s, n));
    for (col, (models, t)) in fits.iter().enumerate() {
        for s in 0..n_s {
            y[[s, col]] = data.y[[s, *t]];
            match models.predict(method, s, data.m[[s, *t]], data.v[[s, *t]])? {
                Prediction::Normal { mu, sigma } => {
                    a[[s, col]] = mu;
                    b[[s, col]] = sigma;
                }
                Prediction::Probability(p) => a[[s, col]] = p,
            }
        }
    }
    if data.kind.is_binary() {
        ForecastSet::probability(a, y)
    } else {
        ForecastSet::normal(a, b, y)
    }
}

fn score_methods(
    data: &ModelData,
    config: &CvConfig,
    fits: &[(&TrainedModels, usize)],
) -> Result<Vec<MethodScores>> {
    config
        .methods
        .iter()
        .map(|&method| {
            let set = forecast_set(data, method, fits)?;
            let reports = metrics_for(data.kind)
                .iter()
                .map(|&metric| score(metric, &set))
                .collect::<Result<Vec<_>>>()?;
            let pit = if data.kind.is_binary() {
                None
            } else {
                Some(pit(&set, config.pit_bins)?)
            };
            Ok(MethodScores { method, reports, pit })
        })
        .collect()
}

/// Score fixed per-site parameters `theta[s]` on every time of `data`.
/// MOS centering uses the time-averaged ensemble mean of `data` itself.
pub fn evaluate_parameters(
    data: &ModelData,
    theta: &[Vec<f64>],
    pit_bins: usize,
) -> Result<(Vec<ScoreReport<f64>>, Option<PitHistogram>)> {
    let p = data.kind.n_params();
    if theta.len() != data.n_sites() || theta.iter().any(|t| t.len() != p) {
        return Err(Error::Dimension(format!(
            "need {} parameters at each of {} grid points",
            p,
            data.n_sites()
        )));
    }
    let m_bar = data.m_bar();
    let (n_s, n_t) = data.y.dim();
    let mut a = Array2::zeros((n_s, n_t));
    let mut b = Array2::zeros((n_s, n_t));
    for ((s, t), _) in data.y.indexed_iter() {
        match predict(data.kind, &theta[s], data.m[[s, t]], data.v[[s, t]], m_bar[s]) {
            Prediction::Normal { mu, sigma } => {
                a[[s, t]] = mu;
                b[[s, t]] = sigma;
            }
            Prediction::Probability(p) => a[[s, t]] = p,
        }
    }
    let set = if data.kind.is_binary() {
        ForecastSet::probability(a, data.y.clone())?
    } else {
        ForecastSet::normal(a, b, data.y.clone())?
    };
    let reports = metrics_for(data.kind)
        .iter()
        .map(|&metric| score(metric, &set))
        .collect::<Result<Vec<_>>>()?;
    let hist = if data.kind.is_binary() {
        None
    } else {
        Some(pit(&set, pit_bins)?)
    };
    Ok((reports, hist))
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64 + 1)
}

/// Brute-force leave-one-out cross-validation: every fold refits the MLEs,
/// re-estimates `κ` and smooths on the remaining `T − 1` times, then
/// scores the held-out time. Folds run in parallel; failed folds are
/// excluded from all methods and listed in the report.
pub fn loo_cv(data: &ModelData, structure: &Rw2dStructure<f64>, config: &CvConfig) -> Result<ComparisonReport> {
    config.validate(data.kind)?;
    let needs_kappa = config.fixed_kappa.is_none()
        && (config.methods.contains(&Method::MaxSmooth) || config.methods.contains(&Method::Independent));
    let warm = if config.warm_start && needs_kappa {
        Some(train_models(data, structure, config, fold_seed(config.seed, 0), None)?)
    } else {
        None
    };
    loo_cv_from(data, structure, config, warm.as_ref())
}

/// [`loo_cv`] with explicit warm-start models (fitted on the full data).
pub fn loo_cv_from(
    data: &ModelData,
    structure: &Rw2dStructure<f64>,
    config: &CvConfig,
    warm: Option<&TrainedModels>,
) -> Result<ComparisonReport> {
    config.validate(data.kind)?;
    if structure.grid != data.grid {
        return Err(Error::Dimension("structure and data use different grids".into()));
    }
    let plan = CvPlan::leave_one_out(data.n_times(), config.seed)?;
    let outcomes: Vec<Result<TrainedModels>> = plan
        .folds
        .par_iter()
        .map(|fold| {
            let train = data.select_times(&fold.train);
            train_models(&train, structure, config, fold_seed(plan.seed, fold.held_out + 1), warm)
        })
        .collect();

    let mut ok: Vec<(&TrainedModels, usize)> = Vec::new();
    let mut failures = Vec::new();
    let mut fold_kappas = Vec::new();
    for (fold, outcome) in plan.folds.iter().zip(&outcomes) {
        match outcome {
            Ok(models) => {
                if let Some(s) = &models.smoothed {
                    fold_kappas.push(s.kappas.clone());
                }
                ok.push((models, fold.held_out));
            }
            Err(e) => failures.push(FoldFailure {
                time: data.times[fold.held_out].clone(),
                message: e.to_string(),
            }),
        }
    }
    if ok.is_empty() {
        return Err(Error::Optimization(format!(
            "all {} cross-validation folds failed; first error: {}",
            plan.len(),
            failures[0].message
        )));
    }
    Ok(ComparisonReport {
        model: data.kind,
        grid: data.grid.clone(),
        lead_time: String::new(),
        methods: score_methods(data, config, &ok)?,
        recovery: Vec::new(),
        failures,
        n_folds: plan.len(),
        fold_kappas,
    })
}

/// Fit once on `train` and score on every time of `test`.
pub fn holdout_evaluation(
    train: &ModelData,
    test: &ModelData,
    structure: &Rw2dStructure<f64>,
    config: &CvConfig,
) -> Result<(TrainedModels, ComparisonReport)> {
    config.validate(train.kind)?;
    if train.kind != test.kind || train.grid != test.grid {
        return Err(Error::Dimension("training and test data differ in model or grid".into()));
    }
    let models = train_models(train, structure, config, fold_seed(config.seed, 0), None)?;
    let pairs: Vec<(&TrainedModels, usize)> = (0..test.n_times()).map(|t| (&models, t)).collect();
    let methods = score_methods(test, config, &pairs)?;
    let fold_kappas = models.smoothed.iter().map(|s| s.kappas.clone()).collect();
    let report = ComparisonReport {
        model: train.kind,
        grid: train.grid.clone(),
        lead_time: String::new(),
        methods,
        recovery: Vec::new(),
        failures: Vec::new(),
        n_folds: 1,
        fold_kappas,
    };
    Ok((models, report))
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Parameter RMSE against the true fields for every parameter method
/// trained in `models`.
pub fn recovery_rows(models: &TrainedModels, truth: &[Vec<f64>]) -> Vec<RecoveryRow> {
    let kind = models.mle.kind;
    let mut rows = Vec::new();
    let mut push = |method: Method, est: &dyn Fn(usize) -> Vec<f64>| {
        for (m, name) in kind.param_names().iter().enumerate() {
            rows.push(RecoveryRow {
                param: name.to_string(),
                method: method.name().to_string(),
                rmse: rmse(&est(m), &truth[m]),
            });
        }
    };
    push(Method::Mle, &|m| models.mle.param_field(m));
    if let Some(s) = &models.smoothed {
        push(Method::MaxSmooth, &|m| s.result.mean_field(m).to_vec());
    }
    if let Some(s) = &models.independent {
        push(Method::Independent, &|m| s.result.mean_field(m).to_vec());
    }
    rows
}

/// Fit all methods on the full synthetic dataset, report parameter RMSE
/// against the truth and, if `run_cv`, leave-one-out scores.
pub fn recovery_experiment(synth: &SynthDataset, config: &CvConfig, run_cv: bool) -> Result<ComparisonReport> {
    let data = ModelData::from_ensemble(synth.model, &synth.data, synth.threshold)?;
    let structure = crate::spatial_prior::make_structure(&data.grid)?;
    config.validate(data.kind)?;
    let models = train_models(&data, &structure, config, fold_seed(config.seed, 0), None)?;
    let recovery = recovery_rows(&models, &synth.truth);
    let mut report = if run_cv {
        loo_cv_from(&data, &structure, config, config.warm_start.then_some(&models))?
    } else {
        ComparisonReport {
            model: data.kind,
            grid: data.grid.clone(),
            lead_time: String::new(),
            methods: Vec::new(),
            recovery: Vec::new(),
            failures: Vec::new(),
            n_folds: 0,
            fold_kappas: Vec::new(),
        }
    };
    report.lead_time = synth.data.lead_time.clone();
    report.recovery = recovery;
    Ok(report)
}

/// Standardized estimation errors `L′(θ̂_s − θ_s)` with `Ĵ_s = LL′`, pooled
/// over sites and parameters; standard normal if the Gaussian measurement
/// model for the MLEs holds.
pub fn standardized_errors(field: &MleField<f64>, truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = field.n_params();
    if truth.len() != p || truth.iter().any(|t| t.len() != field.n_sites()) {
        return Err(Error::Dimension("truth does not match the MLE field".into()));
    }
    let mut out = Vec::with_capacity(p * field.n_sites());
    for (s, fit) in field.fits.iter().enumerate() {
        let l = dense::cholesky(&fit.info, p).ok_or(Error::SingularBlock { site: s })?;
        let d: Vec<f64> = (0..p).map(|m| fit.theta_hat[m] - truth[m][s]).collect();
        for i in 0..p {
            out.push((i..p).map(|k| l[k * p + i] * d[k]).sum());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
