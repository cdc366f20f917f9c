use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use maxsmooth::likelihoods::ModelKind;
use maxsmooth::smoother::SmoothMethod;

#[derive(Debug, Parser)]
#[command(
    name = "maxsmooth",
    version,
    about = "Spatial smoothing of local postprocessing parameters for gridded ensemble forecasts"
)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism
    #[arg(long, global = true, env = "MAXSMOOTH_THREADS", hide_env_values = true, display_order = 100)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the local model at every grid point and write the MLE field
    Fit(FitArgs),
    /// Smooth an MLE field with the random walk prior
    Smooth(SmoothArgs),
    /// Leave-one-out cross-validation of the postprocessing methods
    Cv(CvArgs),
    /// Generate a synthetic dataset with known parameter fields
    Synth(SynthArgs),
    /// Score fitted or smoothed parameters on a dataset
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Mos,
    Logreg,
    Ngr,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Mos => ModelKind::Mos,
            ModelArg::Logreg => ModelKind::Logreg,
            ModelArg::Ngr => ModelKind::Ngr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothMethodArg {
    Full,
    Independent,
}

impl From<SmoothMethodArg> for SmoothMethod {
    fn from(m: SmoothMethodArg) -> Self {
        match m {
            SmoothMethodArg::Full => SmoothMethod::Full,
            SmoothMethodArg::Independent => SmoothMethod::DiagonalIndependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MuTheta {
    Zero,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Local model
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Forecast CSV (lat,lon,time,member,value)
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    /// Observation CSV (lat,lon,time,value)
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event threshold for logistic regression
    #[arg(long, default_value_t = 2.5)]
    pub threshold: f64,
    /// Ridge weight for logistic regression and NGR
    #[arg(long, default_value_t = 1e-4)]
    pub ridge: f64,
    /// Seed for jittered restarts of failed local fits
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML file with default values for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Directory written by `fit`
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full information blocks or per-parameter diagonal approximation
    #[arg(long, value_enum, default_value = "full")]
    pub method: SmoothMethodArg,
    /// Fixed precisions, one per parameter; skips estimation
    #[arg(long, value_delimiter = ',')]
    pub kappa: Vec<f64>,
    /// Prior mean of the parameter fields
    #[arg(long, value_enum, default_value = "zero")]
    pub mu_theta: MuTheta,
    /// Rate of the exponential prior on each precision
    #[arg(long, default_value_t = 5e-5)]
    pub kappa_rate: f64,
    /// TOML file with default values for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Local model
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Forecast CSV; repeat once per lead time
    #[arg(long)]
    pub forecasts: Vec<PathBuf>,
    /// Observation CSV; repeat once per lead time, in the same order
    #[arg(long)]
    pub obs: Vec<PathBuf>,
    /// Lead time labels, one per forecast file; defaults to the file stems
    #[arg(long, value_delimiter = ',')]
    pub lead_times: Vec<String>,
    /// Methods to compare: mle, ms, indep, clim, mle_raw
    #[arg(long, default_value = "mle,ms,indep,clim")]
    pub methods: String,
    /// Event threshold for logistic regression
    #[arg(long, default_value_t = 2.5)]
    pub threshold: f64,
    /// Ridge weight for logistic regression and NGR
    #[arg(long, default_value_t = 1e-4)]
    pub ridge: f64,
    /// Experiment seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed precisions, one per parameter; skips estimation in every fold
    #[arg(long, value_delimiter = ',')]
    pub kappa: Vec<f64>,
    /// Rate of the exponential prior on each precision
    #[arg(long, default_value_t = 5e-5)]
    pub kappa_rate: f64,
    /// Number of PIT histogram bins
    #[arg(long, default_value_t = 10)]
    pub pit_bins: usize,
    /// Start each fold's precision search at the full-data estimate
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub warm_start: bool,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with default values for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Local model generating the observations
    #[arg(long, value_enum, default_value = "logreg")]
    pub model: ModelArg,
    /// Grid rows (latitudes)
    #[arg(long, default_value_t = 23)]
    pub rows: usize,
    /// Grid columns (longitudes)
    #[arg(long, default_value_t = 31)]
    pub cols: usize,
    /// Verification times
    #[arg(long, default_value_t = 20)]
    pub times: usize,
    /// Ensemble members
    #[arg(long, default_value_t = 11)]
    pub members: usize,
    /// Event threshold for logistic regression data
    #[arg(long, default_value_t = 2.5)]
    pub threshold: f64,
    /// Ensemble spread relative to the calibrated spread (below 1 is underdispersed)
    #[arg(long, default_value_t = 1.0)]
    pub spread_bias: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with default values for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory written by `fit` or `smooth`
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Forecast CSV (lat,lon,time,member,value)
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    /// Observation CSV (lat,lon,time,value)
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Event threshold for logistic regression
    #[arg(long, default_value_t = 2.5)]
    pub threshold: f64,
    /// Method label in the output; defaults to mle, ms or indep by input
    #[arg(long)]
    pub label: Option<String>,
    /// Number of PIT histogram bins
    #[arg(long, default_value_t = 10)]
    pub pit_bins: usize,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with default values for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}
