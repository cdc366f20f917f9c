//! Long-format CSV ingestion: `lat,lon,time,member,value` for forecasts and
//! `lat,lon,time,value` for observations.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{EnsembleDataset, GridSpec};
use crate::error::{Error, Result};

pub const FORECAST_HEADER: [&str; 5] = ["lat", "lon", "time", "member", "value"];
pub const OBSERVATION_HEADER: [&str; 4] = ["lat", "lon", "time", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub lat: f64,
    pub lon: f64,
    pub time: String,
    pub member: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub lat: f64,
    pub lon: f64,
    pub time: String,
    pub value: f64,
}

fn check_header(rdr: &mut csv::Reader<std::fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: header must be exactly `{}`, found `{}`",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub(crate) fn read_records<R: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<R>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Ingestion(format!("{}: {other:?}", path.display())),
    })?;
    check_header(&mut rdr, header, path)?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Ingestion(format!("{}: {e}", path.display()))))
        .collect()
}

/// CSV writer that leaves header handling to the caller, so headers are
/// written even for empty tables.
pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Ingestion(format!("{}: {other:?}", path.display())),
        })
}

pub(crate) fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| a.total_cmp(b).is_eq());
    v
}

/// Assemble a dataset from in-memory records; row order is irrelevant.
pub fn dataset_from_records(
    forecasts: &[ForecastRecord],
    observations: &[ObservationRecord],
) -> Result<EnsembleDataset> {
    if forecasts.is_empty() || observations.is_empty() {
        return Err(Error::Ingestion("empty forecast or observation file".into()));
    }
    if forecasts.iter().any(|r| r.member == 0) {
        return Err(Error::Ingestion("member labels must be positive integers".into()));
    }
    let lats = sorted_unique(forecasts.iter().map(|r| r.lat));
    let lons = sorted_unique(forecasts.iter().map(|r| r.lon));
    let obs_lats = sorted_unique(observations.iter().map(|r| r.lat));
    let obs_lons = sorted_unique(observations.iter().map(|r| r.lon));
    if lats != obs_lats || lons != obs_lons {
        return Err(Error::Schema(
            "forecast and observation files describe different grids".into(),
        ));
    }
    let times: Vec<String> = forecasts
        .iter()
        .map(|r| r.time.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let obs_times: Vec<String> = observations
        .iter()
        .map(|r| r.time.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if times != obs_times {
        return Err(Error::Schema(
            "forecast and observation files cover different verification times".into(),
        ));
    }
    let members: Vec<u32> = forecasts
        .iter()
        .map(|r| r.member)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let grid = GridSpec::new(lats, lons)?;
    let (k_n, s_n, t_n) = (members.len(), grid.n_sites(), times.len());
    let time_index = |t: &str| times.binary_search_by(|x| x.as_str().cmp(t)).expect("known time");

    let mut f = Array3::from_elem((k_n, s_n, t_n), f64::NAN);
    let mut seen = Array3::from_elem((k_n, s_n, t_n), false);
    for r in forecasts {
        let s = grid.locate(r.lat, r.lon).expect("grid built from records");
        let k = members.binary_search(&r.member).expect("known member");
        let t = time_index(&r.time);
        if seen[[k, s, t]] {
            return Err(Error::Ingestion(format!(
                "duplicate forecast row (lat={}, lon={}, time={}, member={})",
                r.lat, r.lon, r.time, r.member
            )));
        }
        seen[[k, s, t]] = true;
        f[[k, s, t]] = r.value;
    }
    let mut missing = Vec::new();
    for ((k, s, t), &ok) in seen.indexed_iter() {
        if !ok {
            let (lat, lon) = grid.coords(s);
            missing.push(format!("(lat={lat}, lon={lon}, time={}, member={})", times[t], members[k]));
        }
    }
    if !missing.is_empty() {
        let shown: Vec<_> = missing.iter().take(10).cloned().collect();
        return Err(Error::Ingestion(format!(
            "{} missing forecast rows: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }

    let mut y = Array2::from_elem((s_n, t_n), f64::NAN);
    let mut seen = Array2::from_elem((s_n, t_n), false);
    for r in observations {
        let s = grid.locate(r.lat, r.lon).expect("grid checked");
        let t = time_index(&r.time);
        if seen[[s, t]] {
            return Err(Error::Ingestion(format!(
                "duplicate observation row (lat={}, lon={}, time={})",
                r.lat, r.lon, r.time
            )));
        }
        seen[[s, t]] = true;
        y[[s, t]] = r.value;
    }
    let missing: Vec<String> = seen
        .indexed_iter()
        .filter(|(_, &ok)| !ok)
        .map(|((s, t), _)| {
            let (lat, lon) = grid.coords(s);
            format!("(lat={lat}, lon={lon}, time={})", times[t])
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Ingestion(format!(
            "{} missing observation rows: {}",
            missing.len(),
            missing.iter().take(10).cloned().collect::<Vec<_>>().join(", ")
        )));
    }
    EnsembleDataset::new(grid, times, members, f, y)
}

pub fn load_dataset(forecast_file: &Path, observation_file: &Path) -> Result<EnsembleDataset> {
    let f: Vec<ForecastRecord> = read_records(forecast_file, &FORECAST_HEADER)?;
    let o: Vec<ObservationRecord> = read_records(observation_file, &OBSERVATION_HEADER)?;
    dataset_from_records(&f, &o)
}

/// Write the dataset in canonical order (time, member, site). Values use the
/// shortest decimal representation that round-trips exactly.
pub fn save_dataset(data: &EnsembleDataset, forecast_file: &Path, observation_file: &Path) -> Result<()> {
    let mut w = csv_writer(forecast_file)?;
    w.write_record(FORECAST_HEADER)?;
    for (t, time) in data.times.iter().enumerate() {
        for (k, member) in data.members.iter().enumerate() {
            for s in 0..data.n_sites() {
                let (lat, lon) = data.grid.coords(s);
                w.serialize(ForecastRecord {
                    lat,
                    lon,
                    time: time.clone(),
                    member: *member,
                    value: data.forecasts[[k, s, t]],
                })?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(forecast_file, e))?;

    let mut w = csv_writer(observation_file)?;
    w.write_record(OBSERVATION_HEADER)?;
    for (t, time) in data.times.iter().enumerate() {
        for s in 0..data.n_sites() {
            let (lat, lon) = data.grid.coords(s);
            w.serialize(ObservationRecord {
                lat,
                lon,
                time: time.clone(),
                value: data.observations[[s, t]],
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(observation_file, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records() -> (Vec<ForecastRecord>, Vec<ObservationRecord>) {
        let mut f = Vec::new();
        let mut o = Vec::new();
        for (lat, lon) in [(0.0, 10.0), (0.0, 11.0), (1.0, 10.0), (1.0, 11.0)] {
            f.push(ForecastRecord {
                lat,
                lon,
                time: "2002-04-14".into(),
                member: 1,
                value: lat + 2.0 * lon,
            });
            o.push(ObservationRecord {
                lat,
                lon,
                time: "2002-04-14".into(),
                value: lat - lon,
            });
        }
        (f, o)
    }

    #[test]
    fn small_grid_is_assembled() {
        let (f, o) = records();
        let d = dataset_from_records(&f, &o).unwrap();
        assert_eq!(d.n_sites(), 4);
        // site 1 is (lat=1, lon=10): latitude varies fastest
        assert_eq!(d.grid.coords(1), (1.0, 10.0));
        assert_eq!(d.forecasts[[0, 1, 0]], 21.0);
        assert_eq!(d.observations[[2, 0]], -11.0);
    }

    #[test]
    fn missing_member_row_is_named() {
        let (mut f, o) = records();
        f.push(ForecastRecord {
            lat: 0.0,
            lon: 10.0,
            time: "2002-04-14".into(),
            member: 2,
            value: 0.0,
        });
        let err = dataset_from_records(&f, &o).unwrap_err().to_string();
        assert!(err.contains("member=2"), "{err}");
        assert!(err.contains("lat=1"), "{err}");
    }

    #[test]
    fn shuffled_rows_give_identical_dataset() {
        let (f, o) = records();
        let a = dataset_from_records(&f, &o).unwrap();
        let mut fr = f.clone();
        fr.reverse();
        let mut or = o.clone();
        or.swap(0, 3);
        or.swap(1, 2);
        assert_eq!(a, dataset_from_records(&fr, &or).unwrap());
    }

    #[test]
    fn inconsistent_grids_are_a_schema_error() {
        let (f, mut o) = records();
        o[0].lat = 5.0;
        assert!(matches!(dataset_from_records(&f, &o), Err(Error::Schema(_))));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let fp = dir.path().join("f.csv");
        let op = dir.path().join("o.csv");
        std::fs::write(&fp, "lat,lon,time,value\n0,0,a,1\n").unwrap();
        std::fs::write(&op, "lat,lon,time,value\n0,0,a,1\n").unwrap();
        assert!(matches!(load_dataset(&fp, &op), Err(Error::Schema(_))));
    }

    #[test]
    fn saved_dataset_reloads_identically() {
        let (f, o) = records();
        let d = dataset_from_records(&f, &o).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let fp = dir.path().join("f.csv");
        let op = dir.path().join("o.csv");
        save_dataset(&d, &fp, &op).unwrap();
        assert_eq!(load_dataset(&fp, &op).unwrap(), d);
    }
}
