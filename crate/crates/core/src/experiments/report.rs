use std::path::Path;

use serde::Serialize;

use super::Method;
use crate::error::{Error, Result};
use crate::grid_data::csv_io::csv_writer;
use crate::grid_data::GridSpec;
use crate::likelihoods::ModelKind;
use crate::verification::{
    write_pit, write_score_map, write_scores, Metric, PitHistogram, PitRow, ScoreMapRow, ScoreReport, ScoreRow,
};

/// Scores of one method over all successful folds.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodScores {
    pub method: Method,
    pub reports: Vec<ScoreReport<f64>>,
    pub pit: Option<PitHistogram>,
}

impl MethodScores {
    pub fn report(&self, metric: Metric) -> Option<&ScoreReport<f64>> {
        self.reports.iter().find(|r| r.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldFailure {
    pub time: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub param: String,
    pub method: String,
    pub rmse: f64,
}

/// Scores of all methods on identical folds, plus parameter recovery on
/// synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub model: ModelKind,
    pub grid: GridSpec,
    pub lead_time: String,
    pub methods: Vec<MethodScores>,
    pub recovery: Vec<RecoveryRow>,
    pub failures: Vec<FoldFailure>,
    pub n_folds: usize,
    /// `κ̂` of the full Max-and-Smooth fit in each successful fold.
    pub fold_kappas: Vec<Vec<f64>>,
}

impl ComparisonReport {
    pub fn scores(&self, method: Method) -> Option<&MethodScores> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Spatially averaged score of `method`.
    pub fn value(&self, method: Method, metric: Metric) -> Option<f64> {
        self.scores(method)?.report(metric).map(|r| r.spatial_mean)
    }

    pub fn rmse(&self, method: Method, param: &str) -> Option<f64> {
        self.recovery
            .iter()
            .find(|r| r.method == method.name() && r.param == param)
            .map(|r| r.rmse)
    }

    pub fn score_rows(&self) -> Vec<ScoreRow> {
        self.methods
            .iter()
            .flat_map(|m| m.reports.iter().map(|r| ScoreRow::new(m.method.name(), &self.lead_time, r)))
            .collect()
    }

    pub fn score_map_rows(&self) -> Vec<ScoreMapRow> {
        self.methods
            .iter()
            .flat_map(|m| {
                m.reports
                    .iter()
                    .flat_map(|r| ScoreMapRow::from_report(m.method.name(), &self.grid, r))
            })
            .collect()
    }

    pub fn pit_rows(&self) -> Vec<PitRow> {
        self.methods
            .iter()
            .filter_map(|m| m.pit.as_ref().map(|h| PitRow::from_histogram(m.method.name(), h)))
            .flatten()
            .collect()
    }

    /// Write `scores.csv`, `scores_map.csv`, `pit.csv`, `failures.csv` and,
    /// when recovery rows exist, `recovery.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_scores(&dir.join("scores.csv"), &self.score_rows())?;
        write_score_map(&dir.join("scores_map.csv"), &self.score_map_rows())?;
        write_pit(&dir.join("pit.csv"), &self.pit_rows())?;
        write_failures(&dir.join("failures.csv"), &self.failures)?;
        if !self.recovery.is_empty() {
            write_recovery(&dir.join("recovery.csv"), &self.recovery)?;
        }
        Ok(())
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

/// `failures.csv`: `time,message`.
pub fn write_failures(path: &Path, rows: &[FoldFailure]) -> Result<()> {
    write_rows(path, &["time", "message"], rows)
}

/// `recovery.csv`: `param,method,rmse`.
pub fn write_recovery(path: &Path, rows: &[RecoveryRow]) -> Result<()> {
    write_rows(path, &["param", "method", "rmse"], rows)
}
