use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SmoothMethod, SmoothResult};
use crate::error::{Error, Result};
use crate::grid_data::csv_io::{csv_writer, read_records, sorted_unique};
use crate::grid_data::GridSpec;
use crate::likelihoods::ModelKind;

pub const SMOOTH_HEADER: [&str; 7] = ["lat", "lon", "param", "posterior_mean", "posterior_var", "method", "kappa"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    lat: f64,
    lon: f64,
    param: String,
    posterior_mean: String,
    posterior_var: String,
    method: String,
    kappa: String,
}

fn num(x: &str, path: &Path) -> Result<f64> {
    x.parse()
        .map_err(|_| Error::Ingestion(format!("{}: `{x}` is not a number", path.display())))
}

pub fn write_smooth_result(result: &SmoothResult<f64>, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SMOOTH_HEADER)?;
    for s in 0..result.n_sites() {
        let (lat, lon) = result.grid.coords(s);
        for (m, name) in result.kind.param_names().iter().enumerate() {
            w.serialize(Row {
                lat,
                lon,
                param: name.to_string(),
                posterior_mean: format!("{:.16e}", result.mean_field(m)[s]),
                posterior_var: format!("{:.16e}", result.var_field(m)[s]),
                method: result.method.name().to_string(),
                kappa: format!("{:.16e}", result.kappas[m]),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a smoothed field; the floored-site list is not persisted.
pub fn read_smooth_result(path: &Path) -> Result<SmoothResult<f64>> {
    let rows: Vec<Row> = read_records(path, &SMOOTH_HEADER)?;
    let first = rows
        .first()
        .ok_or_else(|| Error::Ingestion(format!("{}: empty file", path.display())))?;
    let method: SmoothMethod = first.method.parse()?;
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.param) {
            names.push(r.param.clone());
        }
    }
    let kind = ModelKind::from_param_names(&names)?;
    let p = kind.n_params();
    let grid = GridSpec::new(
        sorted_unique(rows.iter().map(|r| r.lat)),
        sorted_unique(rows.iter().map(|r| r.lon)),
    )?;
    let n = grid.n_sites();
    if rows.len() != n * p {
        return Err(Error::Ingestion(format!(
            "{}: expected {} rows, found {}",
            path.display(),
            n * p,
            rows.len()
        )));
    }
    let mut mean = vec![f64::NAN; n * p];
    let mut var = vec![f64::NAN; n * p];
    let mut kappas = vec![f64::NAN; p];
    for r in &rows {
        let s = grid
            .locate(r.lat, r.lon)
            .ok_or_else(|| Error::Schema(format!("{}: point off grid", path.display())))?;
        let m = names.iter().position(|x| *x == r.param).expect("collected above");
        if r.method != first.method {
            return Err(Error::Schema(format!("{}: mixed smoothing methods", path.display())));
        }
        mean[m * n + s] = num(&r.posterior_mean, path)?;
        var[m * n + s] = num(&r.posterior_var, path)?;
        kappas[m] = num(&r.kappa, path)?;
    }
    if mean.iter().any(|v| v.is_nan()) {
        return Err(Error::Ingestion(format!("{}: duplicate or missing rows", path.display())));
    }
    Ok(SmoothResult {
        grid,
        kind,
        posterior_mean: mean,
        posterior_var: var,
        kappas,
        method,
        floored_sites: Vec::new(),
    })
}
