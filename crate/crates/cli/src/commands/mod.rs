mod cv;
mod fit;
mod smooth;
mod synth;
mod verify;

use std::path::{Path, PathBuf};

use clap::ArgMatches;
use serde::Serialize;

use crate::args::Command;
use crate::config::Layers;
use crate::CliError;

pub fn dispatch(command: &Command, matches: &ArgMatches) -> Result<(), CliError> {
    let layers = Layers { matches };
    match command {
        Command::Fit(a) => fit::run(a, &layers),
        Command::Smooth(a) => smooth::run(a, &layers),
        Command::Cv(a) => cv::run(a, &layers),
        Command::Synth(a) => synth::run(a, &layers),
        Command::Verify(a) => verify::run(a, &layers),
    }
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn snapshot<T: Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("config snapshots are plain data")
}

/// Lead time label for a forecast file: its stem.
fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn paths_json(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}
