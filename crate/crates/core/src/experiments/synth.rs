//! Synthetic ensemble datasets drawn from the postprocessing models
//! themselves, with known parameter fields.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_data::csv_io::csv_writer;
use crate::grid_data::{EnsembleDataset, GridSpec};
use crate::likelihoods::{logreg_prob, ngr_predict, ModelKind};
use crate::spatial_prior::make_structure;

/// Generator of one true parameter field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldGenerator {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · sin(2π i/λ_i + phase) · cos(2π j/λ_j)` in grid
    /// index units.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        wavelength_rows: f64,
        wavelength_cols: f64,
        phase: f64,
    },
    /// RW2D draw with precision `kappa`, conditioned on `value` at the first
    /// grid point.
    PinnedRw2d {
        kappa: f64,
        value: f64,
    },
    /// Independent normal values.
    WhiteNoise {
        mean: f64,
        sd: f64,
    },
}

impl FieldGenerator {
    pub fn sample(&self, grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = grid.n_sites();
        match *self {
            FieldGenerator::Constant { value } => Ok(vec![value; n]),
            FieldGenerator::Sinusoidal {
                mean,
                amplitude,
                wavelength_rows,
                wavelength_cols,
                phase,
            } => {
                if !(wavelength_rows > 0.0 && wavelength_cols > 0.0) {
                    return Err(Error::InvalidArgument("wavelengths must be positive".into()));
                }
                let tau = std::f64::consts::TAU;
                Ok((0..n)
                    .map(|s| {
                        let (i, j) = grid.row_col(s);
                        mean + amplitude
                            * (tau * i as f64 / wavelength_rows + phase).sin()
                            * (tau * j as f64 / wavelength_cols).cos()
                    })
                    .collect())
            }
            FieldGenerator::PinnedRw2d { kappa, value } => {
                make_structure::<f64>(grid)?.sample_pinned(kappa, 0, value, rng)
            }
            FieldGenerator::WhiteNoise { mean, sd } => {
                let d = Normal::new(mean, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Ok((0..n).map(|_| d.sample(rng)).collect())
            }
        }
    }
}

/// How ensemble members are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    /// Mean of the underlying signal.
    pub signal_mean: f64,
    /// Standard deviation of the signal over sites and times.
    pub signal_sd: f64,
    /// Typical member spread around the signal.
    pub member_sd: f64,
    /// Log-scale variability of the spread over times (identifies NGR's δ).
    pub spread_variability: f64,
    /// Multiplier on the member spread; below 1 gives underdispersion.
    pub spread_bias: f64,
    /// Members are `exp(·)` of the Gaussian draw (positive, skewed).
    pub positive: bool,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        Self {
            signal_mean: 0.0,
            signal_sd: 2.0,
            member_sd: 1.0,
            spread_variability: 0.4,
            spread_bias: 1.0,
            positive: false,
        }
    }
}

/// Complete description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_times: usize,
    pub n_members: usize,
    pub model: ModelKind,
    /// One generator per model parameter, in parameter order.
    pub true_fields: Vec<FieldGenerator>,
    pub covariates: CovariateSpec,
    /// Event threshold for logistic regression.
    pub threshold: f64,
    pub seed: u64,
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn smooth(mean: f64, amplitude: f64, n_rows: usize, n_cols: usize, phase: f64) -> FieldGenerator {
    FieldGenerator::Sinusoidal {
        mean,
        amplitude,
        wavelength_rows: 1.5 * n_rows as f64,
        wavelength_cols: 1.5 * n_cols as f64,
        phase,
    }
}

impl SynthSpec {
    /// Smooth-truth setup for `model` on an `n_rows × n_cols` grid.
    pub fn smooth_default(model: ModelKind, n_rows: usize, n_cols: usize, n_times: usize, seed: u64) -> Self {
        let f = |mean, amp, phase| smooth(mean, amp, n_rows, n_cols, phase);
        let (true_fields, covariates) = match model {
            ModelKind::Mos => (
                vec![f(10.0, 2.0, 0.0), f(0.8, 0.3, 0.7), f(0.0, 0.4, 1.9)],
                CovariateSpec {
                    signal_mean: 10.0,
                    ..CovariateSpec::default()
                },
            ),
            ModelKind::Logreg => (
                vec![f(-3.0, 0.8, 0.0), f(1.0, 0.4, 1.1)],
                CovariateSpec {
                    signal_mean: 0.6,
                    signal_sd: 0.7,
                    member_sd: 0.5,
                    spread_variability: 0.2,
                    spread_bias: 1.0,
                    positive: true,
                },
            ),
            ModelKind::Ngr => (
                vec![f(0.5, 0.5, 0.0), f(0.9, 0.2, 0.8), f((0.3f64).ln(), 0.3, 1.6), f(0.0, 0.2, 2.4)],
                CovariateSpec::default(),
            ),
        };
        Self {
            n_rows,
            n_cols,
            n_times,
            n_members: 11,
            model,
            true_fields,
            covariates,
            threshold: 2.5,
            seed,
        }
    }

    /// Set the ensemble spread bias; for NGR the true δ field is shifted by
    /// `−2 log(bias)` so the calibrated predictive spread is unchanged.
    pub fn with_spread_bias(mut self, bias: f64) -> Self {
        let old = self.covariates.spread_bias;
        self.covariates.spread_bias = bias;
        if self.model == ModelKind::Ngr {
            let shift = -2.0 * (bias / old).ln();
            if let Some(FieldGenerator::Sinusoidal { mean, .. } | FieldGenerator::WhiteNoise { mean, .. }) =
                self.true_fields.get_mut(3)
            {
                *mean += shift;
            } else if let Some(FieldGenerator::Constant { value } | FieldGenerator::PinnedRw2d { value, .. }) =
                self.true_fields.get_mut(3)
            {
                *value += shift;
            }
        }
        self
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::regular(self.n_rows, self.n_cols, 60.0, -10.0, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.true_fields.len() != self.model.n_params() {
            return Err(Error::InvalidArgument(format!(
                "{} true fields for a {}-parameter model",
                self.true_fields.len(),
                self.model.n_params()
            )));
        }
        if self.n_times < 3 || self.n_members < 2 {
            return Err(Error::InvalidArgument("need at least 3 times and 2 members".into()));
        }
        let c = &self.covariates;
        if !(c.signal_sd >= 0.0 && c.member_sd > 0.0 && c.spread_bias > 0.0 && c.spread_variability >= 0.0) {
            return Err(Error::InvalidArgument("covariate scales must be positive".into()));
        }
        Ok(())
    }
}

/// Dataset with the parameter fields it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub data: EnsembleDataset,
    /// True fields in blocked order, one vector per parameter.
    pub truth: Vec<Vec<f64>>,
    pub model: ModelKind,
    pub threshold: f64,
}

impl SynthDataset {
    pub fn truth_blocked(&self) -> Vec<f64> {
        self.truth.concat()
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const FIELD_STREAM: u64 = 100;
const COVARIATE_STREAM: u64 = 2;
const OBSERVATION_STREAM: u64 = 3;

/// Draw true fields, ensemble members and observations.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let grid = spec.grid()?;
    let (n_s, n_t, n_k) = (grid.n_sites(), spec.n_times, spec.n_members);
    let truth = spec
        .true_fields
        .iter()
        .enumerate()
        .map(|(m, g)| g.sample(&grid, &mut substream(spec.seed, FIELD_STREAM + m as u64)))
        .collect::<Result<Vec<_>>>()?;

    let c = &spec.covariates;
    let mut rng = substream(spec.seed, COVARIATE_STREAM);
    let mut forecasts = Array3::zeros((n_k, n_s, n_t));
    for t in 0..n_t {
        for s in 0..n_s {
            let signal = c.signal_mean + c.signal_sd * rng.sample::<f64, _>(StandardNormal);
            let spread = c.spread_bias
                * c.member_sd
                * (c.spread_variability * rng.sample::<f64, _>(StandardNormal)).exp();
            for k in 0..n_k {
                let x = signal + spread * rng.sample::<f64, _>(StandardNormal);
                forecasts[[k, s, t]] = if c.positive { x.exp() } else { x };
            }
        }
    }
    let kf = n_k as f64;
    let mean = forecasts.sum_axis(ndarray::Axis(0)) / kf;
    let var = Array2::from_shape_fn((n_s, n_t), |(s, t)| {
        (0..n_k).map(|k| (forecasts[[k, s, t]] - mean[[s, t]]).powi(2)).sum::<f64>() / (kf - 1.0)
    });

    let mut rng = substream(spec.seed, OBSERVATION_STREAM);
    let mut obs = Array2::zeros((n_s, n_t));
    for s in 0..n_s {
        let th: Vec<f64> = truth.iter().map(|f| f[s]).collect();
        let m_bar = mean.row(s).sum() / n_t as f64;
        for t in 0..n_t {
            let (m, v) = (mean[[s, t]], var[[s, t]]);
            let z: f64 = rng.sample(StandardNormal);
            obs[[s, t]] = match spec.model {
                ModelKind::Mos => th[0] + th[1] * (m - m_bar) + (0.5 * th[2]).exp() * z,
                ModelKind::Ngr => {
                    let (mu, sigma) = ngr_predict(&th, m, v);
                    mu + sigma * z
                }
                ModelKind::Logreg => {
                    let u: f64 = rng.random();
                    if u < logreg_prob(&th, m) {
                        spec.threshold + Distribution::<f64>::sample(&Exp1, &mut rng)
                    } else {
                        spec.threshold * rng.random::<f64>()
                    }
                }
            };
        }
    }

    let times = (0..n_t).map(|t| format!("t{:05}", t + 1)).collect();
    let members = (1..=n_k as u32).collect();
    let data = EnsembleDataset::new(grid, times, members, forecasts, obs)?.with_labels(
        match spec.model {
            ModelKind::Logreg => "precipitation",
            _ => "temperature",
        },
        "synthetic",
    );
    Ok(SynthDataset {
        data,
        truth,
        model: spec.model,
        threshold: spec.threshold,
    })
}

#[derive(Serialize)]
struct TruthRow<'a> {
    lat: f64,
    lon: f64,
    param: &'a str,
    value: f64,
}

/// Write `truth.csv` (`lat,lon,param,value`).
pub fn write_truth(synth: &SynthDataset, path: &std::path::Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["lat", "lon", "param", "value"])?;
    for (m, name) in synth.model.param_names().iter().enumerate() {
        for (s, v) in synth.truth[m].iter().enumerate() {
            let (lat, lon) = synth.data.grid.coords(s);
            w.serialize(TruthRow {
                lat,
                lon,
                param: name,
                value: *v,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
