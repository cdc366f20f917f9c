use std::path::PathBuf;

use maxsmooth::experiments::{loo_cv, write_failures, CvConfig, Method};
use maxsmooth::grid_data::load_dataset;
use maxsmooth::hyperparams::KappaPrior;
use maxsmooth::likelihoods::{FitConfig, ModelData, ModelKind, RidgeConfig};
use maxsmooth::spatial_prior::make_structure;
use maxsmooth::verification::{write_pit, write_score_map, write_scores};
use serde::Serialize;

use super::{create_out_dir, file_label, paths_json, snapshot};
use crate::args::{CvArgs, ModelArg};
use crate::config::{parse_enum, FileConfig, Layers, OneOrMany};
use crate::manifest::{unix_now, RunManifest};
use crate::CliError;

const KEYS: &[&str] = &[
    "model",
    "forecasts",
    "obs",
    "lead_times",
    "methods",
    "threshold",
    "ridge",
    "seed",
    "kappa",
    "kappa_rate",
    "pit_bins",
    "warm_start",
    "out",
];

#[derive(Serialize)]
struct Resolved {
    model: String,
    forecasts: Vec<String>,
    obs: Vec<String>,
    lead_times: Vec<String>,
    methods: Vec<String>,
    threshold: f64,
    ridge: f64,
    seed: u64,
    kappa: Vec<f64>,
    kappa_rate: f64,
    pit_bins: usize,
    warm_start: bool,
    out: PathBuf,
}

pub fn run(args: &CvArgs, layers: &Layers) -> Result<(), CliError> {
    let started = unix_now();
    let file = FileConfig::load_opt(args.config.as_deref(), "cv", KEYS)?;
    let model: ModelKind = match (args.model, &file.model) {
        (Some(m), _) => m.into(),
        (None, Some(s)) => parse_enum::<ModelArg>(s, "model")?.into(),
        (None, None) => return Err(CliError::input("--model is required (on the command line or in --config)")),
    };
    let forecasts = layers.pick("forecasts", args.forecasts.clone(), file.forecasts.map(OneOrMany::into_vec));
    let obs = layers.pick("obs", args.obs.clone(), file.obs.map(OneOrMany::into_vec));
    if forecasts.is_empty() {
        return Err(CliError::input("--forecasts is required (on the command line or in --config)"));
    }
    if forecasts.len() != obs.len() {
        return Err(CliError::input(format!(
            "{} forecast files but {} observation files",
            forecasts.len(),
            obs.len()
        )));
    }
    let mut lead_times = layers.pick("lead_times", args.lead_times.clone(), file.lead_times.map(OneOrMany::into_vec));
    if lead_times.is_empty() {
        lead_times = forecasts.iter().map(|p| file_label(p)).collect();
    }
    if lead_times.len() != forecasts.len() {
        return Err(CliError::input(format!(
            "{} lead time labels for {} forecast files",
            lead_times.len(),
            forecasts.len()
        )));
    }
    let mut sorted = lead_times.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != lead_times.len() {
        return Err(CliError::input("lead time labels must be distinct"));
    }
    let methods_text = layers.pick(
        "methods",
        args.methods.clone(),
        file.methods.map(|m| m.into_vec().join(",")),
    );
    let methods = Method::parse_list(&methods_text)?;
    let out = args
        .out
        .clone()
        .or(file.out)
        .ok_or_else(|| CliError::input("--out is required (on the command line or in --config)"))?;
    let cfg = Resolved {
        model: model.name().to_string(),
        forecasts: paths_json(&forecasts),
        obs: paths_json(&obs),
        lead_times,
        methods: methods.iter().map(|m| m.name().to_string()).collect(),
        threshold: layers.pick("threshold", args.threshold, file.threshold),
        ridge: layers.pick("ridge", args.ridge, file.ridge),
        seed: layers.pick("seed", args.seed, file.seed),
        kappa: layers.pick("kappa", args.kappa.clone(), file.kappa),
        kappa_rate: layers.pick("kappa_rate", args.kappa_rate, file.kappa_rate),
        pit_bins: layers.pick("pit_bins", args.pit_bins, file.pit_bins),
        warm_start: layers.pick("warm_start", args.warm_start, file.warm_start),
        out,
    };
    let config = CvConfig {
        methods,
        fit: FitConfig {
            ridge: RidgeConfig::with_weight(cfg.ridge),
            ..FitConfig::default()
        },
        kappa_prior: KappaPrior::new(cfg.kappa_rate)?,
        fixed_kappa: (!cfg.kappa.is_empty()).then(|| cfg.kappa.clone()),
        pit_bins: cfg.pit_bins,
        seed: cfg.seed,
        warm_start: cfg.warm_start,
        ..CvConfig::default()
    };

    let mut reports = Vec::new();
    for ((f, o), lead) in forecasts.iter().zip(&obs).zip(&cfg.lead_times) {
        let data = load_dataset(f, o)?;
        let model_data = ModelData::from_ensemble(model, &data, cfg.threshold)?;
        let structure = make_structure::<f64>(&model_data.grid)?;
        let mut report = loo_cv(&model_data, &structure, &config)?;
        report.lead_time = lead.clone();
        eprintln!(
            "cv: lead {lead}: {} of {} folds succeeded",
            report.n_folds - report.failures.len(),
            report.n_folds
        );
        for r in report.score_rows() {
            eprintln!("cv:   {:<6} {:<9} {:.6} ± {:.6}", r.method, r.metric, r.value, r.stderr);
        }
        reports.push(report);
    }

    create_out_dir(&cfg.out)?;
    let rows: Vec<_> = reports.iter().flat_map(|r| r.score_rows()).collect();
    write_scores(&cfg.out.join("scores.csv"), &rows)?;
    let mut outputs = vec!["scores.csv".to_string()];
    let single = reports.len() == 1;
    for report in &reports {
        let suffix = if single {
            String::new()
        } else {
            format!("_{}", report.lead_time)
        };
        let names = [
            format!("scores_map{suffix}.csv"),
            format!("pit{suffix}.csv"),
            format!("failures{suffix}.csv"),
        ];
        write_score_map(&cfg.out.join(&names[0]), &report.score_map_rows())?;
        write_pit(&cfg.out.join(&names[1]), &report.pit_rows())?;
        write_failures(&cfg.out.join(&names[2]), &report.failures)?;
        outputs.extend(names);
    }

    let mut manifest = RunManifest::new("cv", cfg.seed, snapshot(&cfg), started);
    for (f, o) in forecasts.iter().zip(&obs) {
        manifest.add_input(f)?;
        manifest.add_input(o)?;
    }
    manifest.finish(&cfg.out, &outputs)?;
    Ok(())
}
