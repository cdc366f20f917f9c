//! TOML config files. Keys mirror the long flag names with `_` for `-`;
//! explicit flags win over the file, the file wins over flag defaults.

use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub forecasts: Option<OneOrMany<PathBuf>>,
    pub obs: Option<OneOrMany<PathBuf>>,
    pub input: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub lead_times: Option<OneOrMany<String>>,
    pub methods: Option<OneOrMany<String>>,
    pub method: Option<String>,
    pub mu_theta: Option<String>,
    pub label: Option<String>,
    pub threshold: Option<f64>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    pub kappa: Option<Vec<f64>>,
    pub kappa_rate: Option<f64>,
    pub pit_bins: Option<usize>,
    pub warm_start: Option<bool>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub times: Option<usize>,
    pub members: Option<usize>,
    pub spread_bias: Option<f64>,
}

impl FileConfig {
    /// Read `path`, rejecting keys that `command` does not use. Relative
    /// paths in the file are taken relative to the file's directory.
    pub fn load(path: &Path, command: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if let Some(key) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::input(format!(
                "{}: key `{key}` is not used by `{command}` (allowed: {})",
                path.display(),
                allowed.join(", ")
            )));
        }
        let mut cfg: FileConfig = table
            .try_into()
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for list in [&mut cfg.forecasts, &mut cfg.obs].into_iter().flatten() {
            match list {
                OneOrMany::One(p) => rebase(p),
                OneOrMany::Many(v) => v.iter_mut().for_each(rebase),
            }
        }
        for p in [&mut cfg.input, &mut cfg.params, &mut cfg.out].into_iter().flatten() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>, command: &str, allowed: &[&str]) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), |p| Self::load(p, command, allowed))
    }
}

/// Picks between a flag value and a config value.
pub struct Layers<'a> {
    pub matches: &'a ArgMatches,
}

impl Layers<'_> {
    fn explicit(&self, id: &str) -> bool {
        matches!(
            self.matches.value_source(id),
            Some(ValueSource::CommandLine | ValueSource::EnvVariable)
        )
    }

    /// The flag if given explicitly, else the file value, else the flag
    /// default.
    pub fn pick<T>(&self, id: &str, flag: T, file: Option<T>) -> T {
        if self.explicit(id) {
            flag
        } else {
            file.unwrap_or(flag)
        }
    }
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::input(format!("--{flag} is required (on the command line or in --config)")))
}

pub fn parse_enum<E: clap::ValueEnum>(value: &str, key: &str) -> Result<E, CliError> {
    E::from_str(value, true).map_err(|_| CliError::input(format!("config key `{key}`: invalid value `{value}`")))
}

/// A config path key that must hold exactly one path for this command.
pub fn single_path(value: Option<OneOrMany<PathBuf>>, key: &str, command: &str) -> Result<Option<PathBuf>, CliError> {
    match value.map(OneOrMany::into_vec) {
        None => Ok(None),
        Some(mut v) if v.len() == 1 => Ok(v.pop()),
        Some(_) => Err(CliError::input(format!(
            "config key `{key}` must be a single path for `{command}`"
        ))),
    }
}
