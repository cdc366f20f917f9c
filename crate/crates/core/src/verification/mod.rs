//! Proper scores (MSE, Brier, Logscore, CRPS) and PIT histograms. All
//! scores are negatively oriented.

mod io;

pub use io::{write_pit, write_score_map, write_scores, PitRow, ScoreMapRow, ScoreRow};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::scalar::{half_ln_2pi, Real};

/// Forecasts and verifying observations, both indexed `[s, t]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastSet<T> {
    Point { mu: Array2<T>, y: Array2<T> },
    Probability { p: Array2<T>, y: Array2<T> },
    Normal { mu: Array2<T>, sigma: Array2<T>, y: Array2<T> },
}

impl<T: Real> ForecastSet<T> {
    pub fn point(mu: Array2<T>, y: Array2<T>) -> Result<Self> {
        same_shape(&mu, &y)?;
        Ok(Self::Point { mu, y })
    }

    pub fn probability(p: Array2<T>, y: Array2<T>) -> Result<Self> {
        same_shape(&p, &y)?;
        if p.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        Ok(Self::Probability { p, y })
    }

    pub fn normal(mu: Array2<T>, sigma: Array2<T>, y: Array2<T>) -> Result<Self> {
        same_shape(&mu, &y)?;
        same_shape(&sigma, &y)?;
        if sigma.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::InvalidArgument("predictive standard deviations must be positive".into()));
        }
        Ok(Self::Normal { mu, sigma, y })
    }

    pub fn observations(&self) -> &Array2<T> {
        match self {
            Self::Point { y, .. } | Self::Probability { y, .. } | Self::Normal { y, .. } => y,
        }
    }

    /// Point forecast view of a normal forecast (its mean).
    pub fn to_point(&self) -> Result<Self> {
        match self {
            Self::Normal { mu, y, .. } | Self::Point { mu, y } => Ok(Self::Point {
                mu: mu.clone(),
                y: y.clone(),
            }),
            Self::Probability { .. } => Err(kind_error("point or normal", "probability")),
        }
    }
}

fn same_shape<T>(a: &Array2<T>, b: &Array2<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("forecast shape {:?} vs observations {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty forecast set".into()));
    }
    Ok(())
}

fn kind_error(expected: &str, found: &str) -> Error {
    Error::InvalidArgument(format!("expected a {expected} forecast set, got {found}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Mse,
    Brier,
    LogScore,
    Crps,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Brier => "brier",
            Metric::LogScore => "logscore",
            Metric::Crps => "crps",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Metric::Mse),
            "brier" => Ok(Metric::Brier),
            "logscore" => Ok(Metric::LogScore),
            "crps" => Ok(Metric::Crps),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Space-time averaged score with its per-location and per-time averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport<T> {
    pub metric: Metric,
    pub spatial_mean: T,
    /// Time-averaged score at every site.
    pub per_location: Vec<T>,
    /// Site-averaged score at every time.
    pub per_time: Vec<T>,
    /// Standard deviation of `per_time` divided by `√T`.
    pub stderr: T,
    pub n_effective: usize,
}

impl<T: Real> ScoreReport<T> {
    /// Build from elementwise scores `[s, t]`.
    pub fn from_scores(metric: Metric, scores: &Array2<T>) -> Self {
        let (n_s, n_t) = scores.dim();
        let per_location: Vec<T> = scores.mean_axis(Axis(1)).expect("non-empty").to_vec();
        let per_time: Vec<T> = scores.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let spatial_mean = per_location.iter().copied().sum::<T>() / T::from_usize_lossy(n_s);
        let stderr = if n_t > 1 {
            let tm = per_time.iter().copied().sum::<T>() / T::from_usize_lossy(n_t);
            let var = per_time.iter().map(|v| (*v - tm) * (*v - tm)).sum::<T>() / T::from_usize_lossy(n_t - 1);
            (var / T::from_usize_lossy(n_t)).sqrt()
        } else {
            T::nan()
        };
        Self {
            metric,
            spatial_mean,
            per_location,
            per_time,
            stderr,
            n_effective: n_s * n_t,
        }
    }
}

pub fn mse<T: Real>(f: &ForecastSet<T>) -> Result<ScoreReport<T>> {
    match f {
        ForecastSet::Point { mu, y } => {
            let scores = ndarray::Zip::from(mu).and(y).map_collect(|&m, &o| (o - m) * (o - m));
            Ok(ScoreReport::from_scores(Metric::Mse, &scores))
        }
        ForecastSet::Normal { .. } => mse(&f.to_point()?),
        ForecastSet::Probability { .. } => Err(kind_error("point", "probability")),
    }
}

pub fn brier<T: Real>(f: &ForecastSet<T>) -> Result<ScoreReport<T>> {
    let ForecastSet::Probability { p, y } = f else {
        return Err(kind_error("probability", "non-probability"));
    };
    if y.iter().any(|v| *v != T::zero() && *v != T::one()) {
        return Err(Error::InvalidArgument("Brier score needs binary observations".into()));
    }
    let scores = ndarray::Zip::from(p).and(y).map_collect(|&q, &o| (o - q) * (o - q));
    Ok(ScoreReport::from_scores(Metric::Brier, &scores))
}

/// `−log φ((y−μ)/σ) + log σ`, evaluated without exponentiation.
pub fn normal_neg_log_density<T: Real>(mu: T, sigma: T, y: T) -> T {
    let z = (y - mu) / sigma;
    half_ln_2pi::<T>() + sigma.ln() + T::lit(0.5) * z * z
}

pub fn logscore<T: Real>(f: &ForecastSet<T>) -> Result<ScoreReport<T>> {
    let ForecastSet::Normal { mu, sigma, y } = f else {
        return Err(kind_error("normal", "non-normal"));
    };
    let scores = ndarray::Zip::from(mu)
        .and(sigma)
        .and(y)
        .map_collect(|&m, &s, &o| normal_neg_log_density(m, s, o));
    Ok(ScoreReport::from_scores(Metric::LogScore, &scores))
}

/// CRPS of `N(μ, σ²)` at `y`: `σ {z[2Φ(z) − 1] + 2φ(z) − π^{−1/2}}`.
pub fn crps_normal<T: Real>(mu: T, sigma: T, y: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidArgument(format!("σ must be positive, got {sigma}")));
    }
    Ok(crps_unchecked(mu, sigma, y))
}

fn crps_unchecked<T: Real>(mu: T, sigma: T, y: T) -> T {
    let z = (y - mu) / sigma;
    let two = T::lit(2.0);
    let inv_sqrt_pi = T::lit(0.564_189_583_547_756_3);
    sigma * (z * (two * z.std_normal_cdf() - T::one()) + two * z.std_normal_pdf() - inv_sqrt_pi)
}

pub fn crps<T: Real>(f: &ForecastSet<T>) -> Result<ScoreReport<T>> {
    let ForecastSet::Normal { mu, sigma, y } = f else {
        return Err(kind_error("normal", "non-normal"));
    };
    let scores = ndarray::Zip::from(mu)
        .and(sigma)
        .and(y)
        .map_collect(|&m, &s, &o| crps_unchecked(m, s, o));
    Ok(ScoreReport::from_scores(Metric::Crps, &scores))
}

/// Score by metric name.
pub fn score<T: Real>(metric: Metric, f: &ForecastSet<T>) -> Result<ScoreReport<T>> {
    match metric {
        Metric::Mse => mse(f),
        Metric::Brier => brier(f),
        Metric::LogScore => logscore(f),
        Metric::Crps => crps(f),
    }
}

/// Histogram of PIT values on equal-width bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitHistogram {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl PitHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// `(lo, hi)` edges of bin `b`.
    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let n = self.n_bins() as f64;
        (b as f64 / n, (b + 1) as f64 / n)
    }

    /// Largest deviation from the uniform expectation in units of the
    /// multinomial standard deviation `√(N (1/B)(1 − 1/B))`.
    pub fn max_standardized_deviation(&self) -> f64 {
        let b = self.n_bins() as f64;
        let n = self.total as f64;
        let expect = n / b;
        let sd = (n * (1.0 / b) * (1.0 - 1.0 / b)).sqrt();
        self.counts
            .iter()
            .map(|c| (*c as f64 - expect).abs() / sd)
            .fold(0.0, f64::max)
    }
}

pub fn pit<T: Real>(f: &ForecastSet<T>, n_bins: usize) -> Result<PitHistogram> {
    let ForecastSet::Normal { mu, sigma, y } = f else {
        return Err(kind_error("normal", "non-normal"));
    };
    if n_bins == 0 {
        return Err(Error::InvalidArgument("PIT histogram needs at least one bin".into()));
    }
    let mut counts = vec![0usize; n_bins];
    ndarray::Zip::from(mu).and(sigma).and(y).for_each(|&m, &s, &o| {
        let u = ((o - m) / s).std_normal_cdf().as_f64();
        let b = ((u * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[b] += 1;
    });
    Ok(PitHistogram {
        counts,
        total: y.len(),
    })
}

#[cfg(test)]
mod tests;
