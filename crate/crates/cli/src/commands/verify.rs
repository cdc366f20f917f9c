use std::path::PathBuf;

use maxsmooth::experiments::evaluate_parameters;
use maxsmooth::grid_data::load_dataset;
use maxsmooth::likelihoods::{read_mle_field, ModelData};
use maxsmooth::smoother::{read_smooth_result, SmoothMethod};
use maxsmooth::verification::{write_pit, write_score_map, write_scores, PitRow, ScoreMapRow, ScoreRow};
use serde::Serialize;

use super::{create_out_dir, file_label, snapshot};
use crate::args::VerifyArgs;
use crate::config::{required, single_path, FileConfig, Layers};
use crate::manifest::{unix_now, RunManifest};
use crate::CliError;

const KEYS: &[&str] = &["params", "forecasts", "obs", "threshold", "label", "pit_bins", "out"];

#[derive(Serialize)]
struct Resolved {
    params: PathBuf,
    forecasts: PathBuf,
    obs: PathBuf,
    threshold: f64,
    label: String,
    pit_bins: usize,
    out: PathBuf,
}

pub fn run(args: &VerifyArgs, layers: &Layers) -> Result<(), CliError> {
    let started = unix_now();
    let file = FileConfig::load_opt(args.config.as_deref(), "verify", KEYS)?;
    let params = required(args.params.clone().or(file.params), "params")?;
    let smoothed = params.join("smoothed.csv");
    let mut inputs = Vec::new();
    let (kind, grid, theta, default_label) = if smoothed.exists() {
        let r = read_smooth_result(&smoothed)?;
        let theta: Vec<_> = (0..r.n_sites()).map(|s| r.theta_at(s)).collect();
        let label = match r.method {
            SmoothMethod::Full => "ms",
            SmoothMethod::DiagonalIndependent => "indep",
        };
        inputs.push(smoothed);
        (r.kind, r.grid, theta, label)
    } else {
        let estimates = params.join("estimates.csv");
        let info = params.join("info.csv");
        let f = read_mle_field(&estimates, &info)?;
        let theta = f.fits.iter().map(|fit| fit.theta_hat.clone()).collect();
        inputs.push(estimates);
        inputs.push(info);
        (f.kind, f.grid, theta, "mle")
    };
    let cfg = Resolved {
        params,
        forecasts: required(args.forecasts.clone().or(single_path(file.forecasts, "forecasts", "verify")?), "forecasts")?,
        obs: required(args.obs.clone().or(single_path(file.obs, "obs", "verify")?), "obs")?,
        threshold: layers.pick("threshold", args.threshold, file.threshold),
        label: args.label.clone().or(file.label).unwrap_or_else(|| default_label.to_string()),
        pit_bins: layers.pick("pit_bins", args.pit_bins, file.pit_bins),
        out: required(args.out.clone().or(file.out), "out")?,
    };

    let data = load_dataset(&cfg.forecasts, &cfg.obs)?;
    let model_data = ModelData::from_ensemble(kind, &data, cfg.threshold)?;
    if model_data.grid != grid {
        return Err(CliError::input("parameter and dataset grids differ"));
    }
    let (reports, hist) = evaluate_parameters(&model_data, &theta, cfg.pit_bins)?;
    let lead = file_label(&cfg.forecasts);
    for r in &reports {
        eprintln!("verify: {} {} {:.6} ± {:.6}", cfg.label, r.metric.name(), r.spatial_mean, r.stderr);
    }

    create_out_dir(&cfg.out)?;
    let rows: Vec<_> = reports.iter().map(|r| ScoreRow::new(&cfg.label, &lead, r)).collect();
    write_scores(&cfg.out.join("scores.csv"), &rows)?;
    let map: Vec<_> = reports
        .iter()
        .flat_map(|r| ScoreMapRow::from_report(&cfg.label, &grid, r))
        .collect();
    write_score_map(&cfg.out.join("scores_map.csv"), &map)?;
    let pit_rows = hist.map(|h| PitRow::from_histogram(&cfg.label, &h)).unwrap_or_default();
    write_pit(&cfg.out.join("pit.csv"), &pit_rows)?;

    let mut manifest = RunManifest::new("verify", 0, snapshot(&cfg), started);
    for p in inputs.iter().chain([&cfg.forecasts, &cfg.obs]) {
        manifest.add_input(p)?;
    }
    let outputs = ["scores.csv", "scores_map.csv", "pit.csv"].map(String::from);
    manifest.finish(&cfg.out, &outputs)?;
    Ok(())
}
