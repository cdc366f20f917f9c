use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn maxsmooth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxsmooth"))
        .args(args)
        .env_remove("MAXSMOOTH_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = maxsmooth(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn synth(dir: &Path, model: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("synth_{model}"));
    let mut args = vec!["synth", "--model", model, "--rows", "5", "--cols", "6", "--times", "10", "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn synth_with_same_seed_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["synth", "--model", "ngr", "--rows", "4", "--cols", "5", "--seed", "7", "--out", s(out)]);
    }
    for f in ["forecasts.csv", "observations.csv", "truth.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    assert!(read(a.join("truth.csv")).starts_with("lat,lon,param,value\n"));
}

#[test]
fn synth_default_shape_matches_desk_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&["synth", "--out", s(&out)]);
    let obs = read(out.join("observations.csv"));
    assert_eq!(obs.lines().count() - 1, 23 * 31 * 20);
    let f = read(out.join("forecasts.csv"));
    assert_eq!(f.lines().count() - 1, 23 * 31 * 20 * 11);
}

fn mean_member_variance(dir: &Path) -> f64 {
    let mut rdr = csv::Reader::from_path(dir.join("forecasts.csv")).unwrap();
    let mut groups: std::collections::BTreeMap<(String, String, String), Vec<f64>> = Default::default();
    for rec in rdr.records() {
        let r = rec.unwrap();
        groups
            .entry((r[0].to_string(), r[1].to_string(), r[2].to_string()))
            .or_default()
            .push(r[4].parse().unwrap());
    }
    let vars: Vec<f64> = groups
        .values()
        .map(|v| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        })
        .collect();
    vars.iter().sum::<f64>() / vars.len() as f64
}

#[test]
fn spread_bias_makes_ensembles_underdispersed() {
    let dir = tempfile::tempdir().unwrap();
    let calibrated = synth(dir.path(), "ngr", &["--seed", "3"]);
    let narrow = dir.path().join("narrow");
    ok(&["synth", "--model", "ngr", "--rows", "5", "--cols", "6", "--times", "10", "--seed", "3",
        "--spread-bias", "0.5", "--out", s(&narrow)]);
    let ratio = mean_member_variance(&narrow) / mean_member_variance(&calibrated);
    assert!((ratio - 0.25).abs() < 1e-9, "variance ratio {ratio}");
}

#[test]
fn fit_smooth_verify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "mos", &[]);
    let (f, o) = (data.join("forecasts.csv"), data.join("observations.csv"));
    let fit = dir.path().join("fit");
    ok(&["fit", "--model", "mos", "--forecasts", s(&f), "--obs", s(&o), "--out", s(&fit)]);
    assert!(read(fit.join("estimates.csv")).starts_with("lat,lon,param,estimate\n"));
    assert!(read(fit.join("info.csv")).starts_with("lat,lon,row_param,col_param,info\n"));

    let full = dir.path().join("full");
    let indep = dir.path().join("indep");
    ok(&["smooth", "--input", s(&fit), "--out", s(&full), "--method", "full"]);
    ok(&["smooth", "--input", s(&fit), "--out", s(&indep), "--method", "independent"]);
    for d in [&full, &indep] {
        assert!(read(d.join("smoothed.csv")).starts_with("lat,lon,param,posterior_mean,posterior_var,method,kappa\n"));
        assert!(read(d.join("kappa_trace.csv")).lines().count() > 1);
    }
    assert!(read(indep.join("smoothed.csv")).contains("diagonal_independent"));

    let ver = dir.path().join("ver");
    ok(&["verify", "--params", s(&full), "--forecasts", s(&f), "--obs", s(&o), "--out", s(&ver)]);
    let scores = read(ver.join("scores.csv"));
    assert!(scores.starts_with("metric,method,lead_time,value,stderr\n"));
    for metric in ["mse", "logscore", "crps"] {
        assert!(scores.contains(&format!("{metric},ms,forecasts,")), "{scores}");
    }
}

#[test]
fn fixed_kappa_skips_estimation() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "logreg", &[]);
    let fit = dir.path().join("fit");
    ok(&["fit", "--model", "logreg", "--threshold", "2.5", "--forecasts", s(&data.join("forecasts.csv")),
        "--obs", s(&data.join("observations.csv")), "--out", s(&fit)]);
    let out = dir.path().join("sm");
    ok(&["smooth", "--input", s(&fit), "--out", s(&out), "--kappa", "1e4,1e2"]);
    assert_eq!(read(out.join("kappa_trace.csv")), "step,param,log_kappa,objective\n");
    let sm = read(out.join("smoothed.csv"));
    let mut rdr = csv::Reader::from_reader(sm.as_bytes());
    for rec in rdr.records() {
        let r = rec.unwrap();
        let kappa: f64 = r[6].parse().unwrap();
        let want = if &r[2] == "alpha" { 1e4 } else { 1e2 };
        assert_eq!(kappa, want);
    }

    let bad = maxsmooth(&["smooth", "--input", s(&fit), "--out", s(&out), "--kappa", "1e4"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn fit_rerun_is_byte_identical_and_manifest_matches() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "ngr", &[]);
    let (f, o) = (data.join("forecasts.csv"), data.join("observations.csv"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["fit", "--model", "ngr", "--forecasts", s(&f), "--obs", s(&o), "--out", s(out), "--seed", "5"]);
    }
    for name in ["estimates.csv", "info.csv"] {
        assert_eq!(read(a.join(name)), read(b.join(name)));
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(a.join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["model"], "ngr");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for o in outputs {
        let digest = maxsmooth_cli::manifest::sha256_file(&a.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], digest);
    }
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    let manifests = std::fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".json"))
        .count();
    assert_eq!(manifests, 1);
}

#[test]
fn cv_single_lead_gives_one_row_per_metric_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "logreg", &[]);
    let out = dir.path().join("cv");
    ok(&["cv", "--model", "logreg", "--methods", "mle,ms,clim", "--forecasts", s(&data.join("forecasts.csv")),
        "--obs", s(&data.join("observations.csv")), "--out", s(&out)]);
    let scores = read(out.join("scores.csv"));
    let rows: Vec<&str> = scores.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for m in ["mle", "ms", "clim"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("brier,{m},"))).count(), 1);
    }
    for f in ["scores_map.csv", "pit.csv", "failures.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn cv_loops_over_lead_time_files() {
    let dir = tempfile::tempdir().unwrap();
    let d1 = synth(dir.path(), "mos", &["--seed", "1"]);
    let d2 = dir.path().join("second");
    ok(&["synth", "--model", "mos", "--rows", "5", "--cols", "6", "--times", "10", "--seed", "2", "--out", s(&d2)]);
    let out = dir.path().join("cv");
    ok(&["cv", "--model", "mos", "--methods", "mle,ms",
        "--forecasts", s(&d1.join("forecasts.csv")), "--obs", s(&d1.join("observations.csv")),
        "--forecasts", s(&d2.join("forecasts.csv")), "--obs", s(&d2.join("observations.csv")),
        "--lead-times", "w1,w2", "--out", s(&out)]);
    let scores = read(out.join("scores.csv"));
    assert_eq!(scores.lines().count() - 1, 2 * 2 * 3);
    assert!(scores.contains(",w1,") && scores.contains(",w2,"));
    for lead in ["w1", "w2"] {
        assert!(out.join(format!("scores_map_{lead}.csv")).exists());
        assert!(out.join(format!("pit_{lead}.csv")).exists());
    }
}

#[test]
fn cv_results_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "ngr", &[]);
    let f = data.join("forecasts.csv");
    let o = data.join("observations.csv");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        ok(&["--threads", threads, "cv", "--model", "ngr", "--methods", "mle,ms", "--forecasts", s(&f),
            "--obs", s(&o), "--out", s(&out)]);
        outputs.push((read(out.join("scores.csv")), read(out.join("scores_map.csv"))));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "model = \"mos\"\nrows = 3\ncols = 4\ntimes = 6\nseed = 9\nout = \"from_config\"\n").unwrap();
    ok(&["synth", "--config", s(&cfg), "--cols", "5"]);
    let out = dir.path().join("from_config");
    let manifest: serde_json::Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    let spec = &manifest["config"]["spec"];
    assert_eq!(spec["n_rows"], 3);
    assert_eq!(spec["n_cols"], 5);
    assert_eq!(spec["seed"], 9);
    assert_eq!(spec["model"], "mos");

    std::fs::write(&cfg, "model = \"mos\"\nridge = 1.0\n").unwrap();
    let out = maxsmooth(&["synth", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`ridge`"));
}

#[test]
fn exit_codes_distinguish_input_and_numerical_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(maxsmooth(&["fit", "--model", "bogus"]).status.code(), Some(2));
    assert_eq!(maxsmooth(&["frobnicate"]).status.code(), Some(2));
    let missing = maxsmooth(&["fit", "--model", "mos", "--forecasts", "/nonexistent.csv", "--obs",
        "/nonexistent.csv", "--out", s(dir.path())]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(maxsmooth(&["fit", "--model", "mos"]).status.code(), Some(2));

    // constant ensemble mean over time: MOS slope is not identified
    let f = dir.path().join("f.csv");
    let o = dir.path().join("o.csv");
    let mut fc = String::from("lat,lon,time,member,value\n");
    let mut ob = String::from("lat,lon,time,value\n");
    for t in 0..4 {
        for (lat, lon) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            fc.push_str(&format!("{lat},{lon},t{t},1,1.0\n{lat},{lon},t{t},2,1.0\n"));
            ob.push_str(&format!("{lat},{lon},t{t},{}\n", t as f64 * 0.5 + lat as f64));
        }
    }
    std::fs::write(&f, fc).unwrap();
    std::fs::write(&o, ob).unwrap();
    let out = maxsmooth(&["fit", "--model", "mos", "--forecasts", s(&f), "--obs", s(&o), "--out",
        s(&dir.path().join("fit"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s=0"));

    assert_eq!(maxsmooth(&["--help"]).status.code(), Some(0));
}
