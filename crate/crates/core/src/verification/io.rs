use std::path::Path;

use serde::Serialize;

use super::{PitHistogram, ScoreReport};
use crate::error::{Error, Result};
use crate::grid_data::csv_io::csv_writer;
use crate::grid_data::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub metric: String,
    pub method: String,
    pub lead_time: String,
    pub value: f64,
    pub stderr: f64,
}

impl ScoreRow {
    pub fn new(method: &str, lead_time: &str, report: &ScoreReport<f64>) -> Self {
        Self {
            metric: report.metric.name().to_string(),
            method: method.to_string(),
            lead_time: lead_time.to_string(),
            value: report.spatial_mean,
            stderr: report.stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMapRow {
    pub metric: String,
    pub method: String,
    pub lat: f64,
    pub lon: f64,
    pub value: f64,
}

impl ScoreMapRow {
    /// One row per grid point of the report's time-averaged scores.
    pub fn from_report(method: &str, grid: &GridSpec, report: &ScoreReport<f64>) -> Vec<Self> {
        report
            .per_location
            .iter()
            .enumerate()
            .map(|(s, v)| {
                let (lat, lon) = grid.coords(s);
                Self {
                    metric: report.metric.name().to_string(),
                    method: method.to_string(),
                    lat,
                    lon,
                    value: *v,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitRow {
    pub method: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

impl PitRow {
    pub fn from_histogram(method: &str, hist: &PitHistogram) -> Vec<Self> {
        hist.counts
            .iter()
            .enumerate()
            .map(|(b, c)| {
                let (bin_lo, bin_hi) = hist.bin_edges(b);
                Self {
                    method: method.to_string(),
                    bin_lo,
                    bin_hi,
                    count: *c,
                }
            })
            .collect()
    }
}

fn write_rows<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `scores.csv`: `metric,method,lead_time,value,stderr`.
pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    write_rows(path, &["metric", "method", "lead_time", "value", "stderr"], rows)
}

/// `scores_map.csv`: `metric,method,lat,lon,value`.
pub fn write_score_map(path: &Path, rows: &[ScoreMapRow]) -> Result<()> {
    write_rows(path, &["metric", "method", "lat", "lon", "value"], rows)
}

/// `pit.csv`: `method,bin_lo,bin_hi,count`.
pub fn write_pit(path: &Path, rows: &[PitRow]) -> Result<()> {
    write_rows(path, &["method", "bin_lo", "bin_hi", "count"], rows)
}
