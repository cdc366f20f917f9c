use std::path::PathBuf;

use maxsmooth::experiments::{synth_generate, write_truth, SynthSpec};
use maxsmooth::grid_data::save_dataset;
use maxsmooth::likelihoods::ModelKind;
use serde::Serialize;

use super::{create_out_dir, snapshot};
use crate::args::{ModelArg, SynthArgs};
use crate::config::{parse_enum, required, FileConfig, Layers};
use crate::manifest::{unix_now, RunManifest};
use crate::CliError;

const KEYS: &[&str] = &[
    "model",
    "rows",
    "cols",
    "times",
    "members",
    "threshold",
    "spread_bias",
    "seed",
    "out",
];

#[derive(Serialize)]
struct Resolved {
    out: PathBuf,
    spread_bias: f64,
    spec: SynthSpec,
}

pub fn run(args: &SynthArgs, layers: &Layers) -> Result<(), CliError> {
    let started = unix_now();
    let file = FileConfig::load_opt(args.config.as_deref(), "synth", KEYS)?;
    let model_arg = match &file.model {
        Some(s) => layers.pick("model", args.model, Some(parse_enum::<ModelArg>(s, "model")?)),
        None => args.model,
    };
    let model: ModelKind = model_arg.into();
    let rows = layers.pick("rows", args.rows, file.rows);
    let cols = layers.pick("cols", args.cols, file.cols);
    let times = layers.pick("times", args.times, file.times);
    let seed = layers.pick("seed", args.seed, file.seed);
    let spread_bias = layers.pick("spread_bias", args.spread_bias, file.spread_bias);
    if !(spread_bias > 0.0 && spread_bias.is_finite()) {
        return Err(CliError::input(format!("--spread-bias must be positive, got {spread_bias}")));
    }
    let mut spec = SynthSpec::smooth_default(model, rows, cols, times, seed).with_spread_bias(spread_bias);
    spec.n_members = layers.pick("members", args.members, file.members);
    spec.threshold = layers.pick("threshold", args.threshold, file.threshold);
    spec.validate()?;
    let cfg = Resolved {
        out: required(args.out.clone().or(file.out), "out")?,
        spread_bias,
        spec,
    };

    let synth = synth_generate(&cfg.spec)?;
    create_out_dir(&cfg.out)?;
    save_dataset(
        &synth.data,
        &cfg.out.join("forecasts.csv"),
        &cfg.out.join("observations.csv"),
    )?;
    write_truth(&synth, &cfg.out.join("truth.csv"))?;
    eprintln!(
        "synth: {} data on a {rows}x{cols} grid, {times} times, {} members",
        model, cfg.spec.n_members
    );

    let outputs = ["forecasts.csv", "observations.csv", "truth.csv"].map(String::from);
    RunManifest::new("synth", seed, snapshot(&cfg), started).finish(&cfg.out, &outputs)?;
    Ok(())
}
