//! CSV persistence of MLE fields: one file of estimates and a companion
//! file of information matrix entries.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LocalFit, MleField, ModelKind};
use crate::error::{Error, Result};
use crate::grid_data::csv_io::{csv_writer, read_records, sorted_unique};
use crate::grid_data::GridSpec;

pub const ESTIMATE_HEADER: [&str; 4] = ["lat", "lon", "param", "estimate"];
pub const INFO_HEADER: [&str; 5] = ["lat", "lon", "row_param", "col_param", "info"];

#[derive(Debug, Serialize, Deserialize)]
struct EstimateRow {
    lat: f64,
    lon: f64,
    param: String,
    estimate: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct InfoRow {
    lat: f64,
    lon: f64,
    row_param: String,
    col_param: String,
    info: String,
}

/// 17 significant digits: decimal round-trip is exact for `f64`.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse(x: &str, path: &Path) -> Result<f64> {
    x.trim()
        .parse()
        .map_err(|_| Error::Ingestion(format!("{}: `{x}` is not a number", path.display())))
}

pub fn write_mle_field(field: &MleField<f64>, estimates: &Path, info: &Path) -> Result<()> {
    let names = field.kind.param_names();
    let p = names.len();
    let mut w = csv_writer(estimates)?;
    w.write_record(ESTIMATE_HEADER)?;
    for (s, fit) in field.fits.iter().enumerate() {
        let (lat, lon) = field.grid.coords(s);
        for (m, name) in names.iter().enumerate() {
            w.serialize(EstimateRow {
                lat,
                lon,
                param: name.to_string(),
                estimate: fmt17(fit.theta_hat[m]),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(estimates, e))?;

    let mut w = csv_writer(info)?;
    w.write_record(INFO_HEADER)?;
    for (s, fit) in field.fits.iter().enumerate() {
        let (lat, lon) = field.grid.coords(s);
        for r in 0..p {
            for c in 0..p {
                w.serialize(InfoRow {
                    lat,
                    lon,
                    row_param: names[r].to_string(),
                    col_param: names[c].to_string(),
                    info: fmt17(fit.info[r * p + c]),
                })?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(info, e))?;
    Ok(())
}

/// Read an MLE field. Convergence flags are not persisted: loaded fits are
/// marked converged with an unknown (NaN) log-likelihood.
pub fn read_mle_field(estimates: &Path, info: &Path) -> Result<MleField<f64>> {
    let est: Vec<EstimateRow> = read_records(estimates, &ESTIMATE_HEADER)?;
    let inf: Vec<InfoRow> = read_records(info, &INFO_HEADER)?;
    if est.is_empty() {
        return Err(Error::Ingestion(format!("{}: no estimates", estimates.display())));
    }
    let mut names: Vec<String> = Vec::new();
    for r in &est {
        if !names.contains(&r.param) {
            names.push(r.param.clone());
        }
    }
    let kind = ModelKind::from_param_names(&names)?;
    let p = kind.n_params();
    let grid = GridSpec::new(
        sorted_unique(est.iter().map(|r| r.lat)),
        sorted_unique(est.iter().map(|r| r.lon)),
    )?;
    let n = grid.n_sites();
    let pidx: HashMap<&str, usize> = kind.param_names().iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let locate = |lat: f64, lon: f64, path: &Path| {
        grid.locate(lat, lon).ok_or_else(|| {
            Error::Schema(format!("{}: (lat={lat}, lon={lon}) is not on the grid", path.display()))
        })
    };
    let param = |name: &str, path: &Path| {
        pidx.get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("{}: unknown parameter `{name}`", path.display())))
    };

    let mut theta = vec![f64::NAN; n * p];
    let mut seen = vec![false; n * p];
    for r in &est {
        let k = locate(r.lat, r.lon, estimates)? * p + param(&r.param, estimates)?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::Ingestion(format!(
                "{}: duplicate estimate (lat={}, lon={}, param={})",
                estimates.display(),
                r.lat,
                r.lon,
                r.param
            )));
        }
        theta[k] = parse(&r.estimate, estimates)?;
    }
    if let Some(k) = seen.iter().position(|x| !x) {
        let (lat, lon) = grid.coords(k / p);
        return Err(Error::Ingestion(format!(
            "{}: missing estimate (lat={lat}, lon={lon}, param={})",
            estimates.display(),
            kind.param_names()[k % p]
        )));
    }

    let mut infos = vec![f64::NAN; n * p * p];
    let mut seen = vec![false; n * p * p];
    for r in &inf {
        let s = locate(r.lat, r.lon, info)?;
        let k = s * p * p + param(&r.row_param, info)? * p + param(&r.col_param, info)?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::Ingestion(format!(
                "{}: duplicate information entry (lat={}, lon={}, {}, {})",
                info.display(),
                r.lat,
                r.lon,
                r.row_param,
                r.col_param
            )));
        }
        infos[k] = parse(&r.info, info)?;
    }
    if let Some(k) = seen.iter().position(|x| !x) {
        let (lat, lon) = grid.coords(k / (p * p));
        return Err(Error::Ingestion(format!(
            "{}: missing information entry at (lat={lat}, lon={lon})",
            info.display()
        )));
    }
    let fits = (0..n)
        .map(|s| LocalFit {
            theta_hat: theta[s * p..(s + 1) * p].to_vec(),
            info: infos[s * p * p..(s + 1) * p * p].to_vec(),
            converged: true,
            loglik: f64::NAN,
            info_floored: false,
            degenerate_variance: false,
        })
        .collect();
    MleField::new(grid, kind, fits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = GridSpec::regular(2, 3, 40.0, -10.0, 0.25).unwrap();
        let fits = (0..6)
            .map(|s| {
                let x = (s as f64 + 0.1) / 3.0;
                LocalFit {
                    theta_hat: vec![x, -x * 1e-7, std::f64::consts::PI * x],
                    info: vec![x, 1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0, 1e-300, 0.0, 1e-300, 7.0],
                    converged: true,
                    loglik: f64::NAN,
                    info_floored: false,
                    degenerate_variance: false,
                }
            })
            .collect();
        let field = MleField::new(grid, ModelKind::Mos, fits).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (e, i) = (dir.path().join("est.csv"), dir.path().join("info.csv"));
        write_mle_field(&field, &e, &i).unwrap();
        let back = read_mle_field(&e, &i).unwrap();
        assert_eq!(back.kind, ModelKind::Mos);
        assert_eq!(back.grid, field.grid);
        for (a, b) in field.fits.iter().zip(&back.fits) {
            assert!(a.theta_hat.iter().zip(&b.theta_hat).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(a.info.iter().zip(&b.info).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
