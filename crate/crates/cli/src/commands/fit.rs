use std::path::PathBuf;

use maxsmooth::grid_data::load_dataset;
use maxsmooth::likelihoods::{fit_field, write_mle_field, FitConfig, ModelData, ModelKind, RidgeConfig};
use serde::Serialize;

use super::{create_out_dir, snapshot};
use crate::args::{FitArgs, ModelArg};
use crate::config::{parse_enum, required, single_path, FileConfig, Layers};
use crate::manifest::{unix_now, RunManifest};
use crate::CliError;

const KEYS: &[&str] = &["model", "forecasts", "obs", "out", "threshold", "ridge", "seed"];

#[derive(Serialize)]
struct Resolved {
    model: String,
    forecasts: PathBuf,
    obs: PathBuf,
    out: PathBuf,
    threshold: f64,
    ridge: f64,
    seed: u64,
}

pub fn run(args: &FitArgs, layers: &Layers) -> Result<(), CliError> {
    let started = unix_now();
    let file = FileConfig::load_opt(args.config.as_deref(), "fit", KEYS)?;
    let model: ModelKind = match (args.model, &file.model) {
        (Some(m), _) => m.into(),
        (None, Some(s)) => parse_enum::<ModelArg>(s, "model")?.into(),
        (None, None) => return Err(CliError::input("--model is required (on the command line or in --config)")),
    };
    let cfg = Resolved {
        model: model.name().to_string(),
        forecasts: required(args.forecasts.clone().or(single_path(file.forecasts, "forecasts", "fit")?), "forecasts")?,
        obs: required(args.obs.clone().or(single_path(file.obs, "obs", "fit")?), "obs")?,
        out: required(args.out.clone().or(file.out), "out")?,
        threshold: layers.pick("threshold", args.threshold, file.threshold),
        ridge: layers.pick("ridge", args.ridge, file.ridge),
        seed: layers.pick("seed", args.seed, file.seed),
    };

    let data = load_dataset(&cfg.forecasts, &cfg.obs)?;
    let model_data = ModelData::from_ensemble(model, &data, cfg.threshold)?;
    let fit_config = FitConfig {
        ridge: RidgeConfig::with_weight(cfg.ridge),
        seed: cfg.seed,
        ..FitConfig::default()
    };
    let field = fit_field(&model_data, &fit_config)?;
    eprintln!(
        "fit: {} model, {} of {} grid points converged",
        model,
        field.n_converged(),
        field.n_sites()
    );

    create_out_dir(&cfg.out)?;
    write_mle_field(&field, &cfg.out.join("estimates.csv"), &cfg.out.join("info.csv"))?;
    let mut manifest = RunManifest::new("fit", cfg.seed, snapshot(&cfg), started);
    manifest.add_input(&cfg.forecasts)?;
    manifest.add_input(&cfg.obs)?;
    manifest.finish(&cfg.out, &["estimates.csv".into(), "info.csv".into()])?;
    Ok(())
}
