//! Grid geometry, the canonical column-stacked site index, ensemble
//! datasets and their summary statistics.
//!
//! Sites are numbered with the latitude (row) index varying fastest:
//! `s = j · N_i + i` for zero-based row `i` and column `j`. Latitudes and
//! longitudes are kept in ascending order.

pub(crate) mod csv_io;

pub use csv_io::{dataset_from_records, load_dataset, save_dataset, ForecastRecord, ObservationRecord};

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};

/// Regular latitude/longitude lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lats: Vec<f64>,
    lons: Vec<f64>,
}

impl GridSpec {
    pub fn new(lats: Vec<f64>, lons: Vec<f64>) -> Result<Self> {
        if lats.len() < 2 || lons.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 rows and 2 columns, got {}x{}",
                lats.len(),
                lons.len()
            )));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&lats) || !increasing(&lons) {
            return Err(Error::InvalidArgument(
                "latitudes and longitudes must be strictly increasing".into(),
            ));
        }
        Ok(Self { lats, lons })
    }

    /// Evenly spaced grid starting at `(lat0, lon0)` with spacing `step` degrees.
    pub fn regular(n_rows: usize, n_cols: usize, lat0: f64, lon0: f64, step: f64) -> Result<Self> {
        Self::new(
            (0..n_rows).map(|i| lat0 + step * i as f64).collect(),
            (0..n_cols).map(|j| lon0 + step * j as f64).collect(),
        )
    }

    /// Number of latitudes, `N_i`.
    pub fn n_rows(&self) -> usize {
        self.lats.len()
    }

    /// Number of longitudes, `N_j`.
    pub fn n_cols(&self) -> usize {
        self.lons.len()
    }

    /// `S = N_i · N_j`.
    pub fn n_sites(&self) -> usize {
        self.n_rows() * self.n_cols()
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    /// Zero-based site of zero-based `(row, col)`.
    #[inline]
    pub fn site(&self, row: usize, col: usize) -> usize {
        col * self.n_rows() + row
    }

    /// Zero-based `(row, col)` of a zero-based site.
    #[inline]
    pub fn row_col(&self, site: usize) -> (usize, usize) {
        (site % self.n_rows(), site / self.n_rows())
    }

    /// `(lat, lon)` of a zero-based site.
    pub fn coords(&self, site: usize) -> (f64, f64) {
        let (i, j) = self.row_col(site);
        (self.lats[i], self.lons[j])
    }

    /// Zero-based site for exact coordinates, if on the grid.
    pub fn locate(&self, lat: f64, lon: f64) -> Option<usize> {
        let i = self.lats.binary_search_by(|x| x.total_cmp(&lat)).ok()?;
        let j = self.lons.binary_search_by(|x| x.total_cmp(&lon)).ok()?;
        Some(self.site(i, j))
    }
}

/// One-based vectorization index `s = (j − 1) · N_i + i`.
pub fn vec_index(i: usize, j: usize, grid: &GridSpec) -> Result<usize> {
    if i == 0 || i > grid.n_rows() || j == 0 || j > grid.n_cols() {
        return Err(Error::Index(format!(
            "(i={i}, j={j}) outside 1..={} x 1..={}",
            grid.n_rows(),
            grid.n_cols()
        )));
    }
    Ok((j - 1) * grid.n_rows() + i)
}

/// Ensemble forecasts and verifying observations for one variable and one
/// lead time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDataset {
    pub grid: GridSpec,
    /// Verification time labels, sorted.
    pub times: Vec<String>,
    /// Member labels, sorted.
    pub members: Vec<u32>,
    /// `f[k, s, t]`.
    pub forecasts: Array3<f64>,
    /// `y[s, t]`.
    pub observations: Array2<f64>,
    pub variable: String,
    pub lead_time: String,
}

impl EnsembleDataset {
    pub fn new(
        grid: GridSpec,
        times: Vec<String>,
        members: Vec<u32>,
        forecasts: Array3<f64>,
        observations: Array2<f64>,
    ) -> Result<Self> {
        let (k, s, t) = forecasts.dim();
        if k != members.len() || s != grid.n_sites() || t != times.len() {
            return Err(Error::Dimension(format!(
                "forecasts are {k}x{s}x{t}, expected {}x{}x{}",
                members.len(),
                grid.n_sites(),
                times.len()
            )));
        }
        if observations.dim() != (s, t) {
            return Err(Error::Dimension(format!(
                "observations are {:?}, expected ({s}, {t})",
                observations.dim()
            )));
        }
        if forecasts.iter().chain(observations.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Ingestion("non-finite forecast or observation value".into()));
        }
        Ok(Self {
            grid,
            times,
            members,
            forecasts,
            observations,
            variable: String::new(),
            lead_time: String::new(),
        })
    }

    pub fn with_labels(mut self, variable: impl Into<String>, lead_time: impl Into<String>) -> Self {
        self.variable = variable.into();
        self.lead_time = lead_time.into();
        self
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_sites(&self) -> usize {
        self.grid.n_sites()
    }

    /// Dataset restricted to the given time indices (in the given order).
    pub fn select_times(&self, idx: &[usize]) -> Self {
        Self {
            grid: self.grid.clone(),
            times: idx.iter().map(|&t| self.times[t].clone()).collect(),
            members: self.members.clone(),
            forecasts: self.forecasts.select(Axis(2), idx),
            observations: self.observations.select(Axis(1), idx),
            variable: self.variable.clone(),
            lead_time: self.lead_time.clone(),
        }
    }
}

/// Ensemble mean, unbiased ensemble variance and time-averaged mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    /// `m[s, t]`.
    pub mean: Array2<f64>,
    /// `v[s, t]`, divisor `K − 1`.
    pub variance: Array2<f64>,
    /// `m̄_s`.
    pub time_mean: Vec<f64>,
}

impl EnsembleSummary {
    /// Build directly from mean and variance arrays.
    pub fn from_moments(mean: Array2<f64>, variance: Array2<f64>) -> Result<Self> {
        if mean.dim() != variance.dim() {
            return Err(Error::Dimension("mean and variance shapes differ".into()));
        }
        if variance.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("ensemble variance must be non-negative".into()));
        }
        let time_mean = mean.rows().into_iter().map(|r| r.sum() / r.len() as f64).collect();
        Ok(Self {
            mean,
            variance,
            time_mean,
        })
    }

    pub fn select_times(&self, idx: &[usize]) -> Self {
        Self::from_moments(
            self.mean.select(Axis(1), idx),
            self.variance.select(Axis(1), idx),
        )
        .expect("subset of a valid summary")
    }
}

pub fn summarize_ensemble(data: &EnsembleDataset) -> Result<EnsembleSummary> {
    let k = data.n_members();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "unbiased ensemble variance needs K >= 2 members, got {k}"
        )));
    }
    let (_, s_n, t_n) = data.forecasts.dim();
    let mut mean = Array2::zeros((s_n, t_n));
    let mut variance = Array2::zeros((s_n, t_n));
    for s in 0..s_n {
        for t in 0..t_n {
            let members = data.forecasts.slice(ndarray::s![.., s, t]);
            let m = members.sum() / k as f64;
            let ss: f64 = members.iter().map(|f| (f - m) * (f - m)).sum();
            mean[[s, t]] = m;
            variance[[s, t]] = ss / (k - 1) as f64;
        }
    }
    EnsembleSummary::from_moments(mean, variance)
}

/// Binary exceedance events with the ensemble-mean covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub grid: GridSpec,
    pub times: Vec<String>,
    /// `y[s, t] ∈ {0, 1}`.
    pub events: Array2<u8>,
    /// Ensemble-mean forecast `m[s, t]`.
    pub covariate: Array2<f64>,
    pub threshold: f64,
}

impl BinaryDataset {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_sites(&self) -> usize {
        self.grid.n_sites()
    }

    pub fn select_times(&self, idx: &[usize]) -> Self {
        Self {
            grid: self.grid.clone(),
            times: idx.iter().map(|&t| self.times[t].clone()).collect(),
            events: self.events.select(Axis(1), idx),
            covariate: self.covariate.select(Axis(1), idx),
            threshold: self.threshold,
        }
    }
}

/// Event indicator `1{obs > threshold}`; an observation equal to the
/// threshold is a non-event.
#[inline]
pub fn exceeds(obs: f64, threshold: f64) -> u8 {
    u8::from(obs > threshold)
}

pub fn binarize(data: &EnsembleDataset, threshold: f64) -> Result<BinaryDataset> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument("threshold must be finite".into()));
    }
    let covariate = data.forecasts.mean_axis(Axis(0)).expect("K >= 1");
    Ok(BinaryDataset {
        grid: data.grid.clone(),
        times: data.times.clone(),
        events: data.observations.mapv(|y| exceeds(y, threshold)),
        covariate,
        threshold,
    })
}
