use ndarray::{Array2, Array3};

use super::*;
use crate::grid_data::{EnsembleDataset, GridSpec};
use crate::likelihoods::fit_field;
use crate::spatial_prior::make_structure;

fn mos_constant(n_rows: usize, n_cols: usize, n_times: usize, seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::smooth_default(ModelKind::Mos, n_rows, n_cols, n_times, seed);
    spec.true_fields = vec![
        FieldGenerator::Constant { value: 0.0 },
        FieldGenerator::Constant { value: 1.0 },
        FieldGenerator::Constant { value: 0.0 },
    ];
    spec
}

#[test]
fn folds_hold_out_each_time_once() {
    let plan = CvPlan::leave_one_out(3, 0).unwrap();
    assert_eq!(plan.len(), 3);
    for (t, f) in plan.folds.iter().enumerate() {
        assert_eq!(f.held_out, t);
        assert_eq!(f.train.len(), 2);
        assert!(!f.train.contains(&t));
    }
    assert!(CvPlan::leave_one_out(2, 0).is_err());
}

#[test]
fn climatology_clamp_and_rate() {
    let zeros = Array2::zeros((1, 10));
    assert_eq!(climatology_forecast(&zeros).unwrap(), vec![0.05]);
    let ev = Array2::from_shape_vec((1, 4), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    assert_eq!(climatology_forecast(&ev).unwrap(), vec![0.5]);
}

#[test]
fn method_lists_parse() {
    assert_eq!(
        Method::parse_list("mle, ms,clim,ms").unwrap(),
        vec![Method::Mle, Method::MaxSmooth, Method::Climatology]
    );
    assert!(Method::parse_list("mle,bogus").is_err());
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
}

#[test]
fn synthetic_data_is_reproducible() {
    let spec = SynthSpec::smooth_default(ModelKind::Ngr, 4, 5, 12, 7);
    assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
    let other = SynthSpec { seed: 8, ..spec.clone() };
    assert_ne!(synth_generate(&other).unwrap().data, synth_generate(&spec).unwrap().data);
}

#[test]
fn mos_regression_slope_is_recovered() {
    let synth = synth_generate(&mos_constant(2, 2, 5000, 3)).unwrap();
    let d = &synth.data;
    let m = d.forecasts.mean_axis(ndarray::Axis(0)).unwrap();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in 0..d.n_sites() {
        let mb = m.row(s).mean().unwrap();
        let yb = d.observations.row(s).mean().unwrap();
        for t in 0..d.n_times() {
            sxy += (m[[s, t]] - mb) * (d.observations[[s, t]] - yb);
            sxx += (m[[s, t]] - mb).powi(2);
        }
    }
    assert!((sxy / sxx - 1.0).abs() < 0.05, "slope {}", sxy / sxx);
}

#[test]
fn logreg_mle_scatter_matches_information() {
    let mut spec = SynthSpec::smooth_default(ModelKind::Logreg, 8, 8, 200, 11);
    spec.true_fields = vec![
        FieldGenerator::Constant { value: -1.0 },
        FieldGenerator::Sinusoidal {
            mean: 0.5,
            amplitude: 0.0,
            wavelength_rows: 12.0,
            wavelength_cols: 12.0,
            phase: 0.0,
        },
    ];
    let synth = synth_generate(&spec).unwrap();
    assert!(synth.truth[1].iter().all(|b| *b == 0.5));
    let data = ModelData::from_ensemble(ModelKind::Logreg, &synth.data, synth.threshold).unwrap();
    let field = fit_field(&data, &FitConfig::default()).unwrap();
    let chi2: f64 = field
        .fits
        .iter()
        .map(|f| {
            let inv = crate::dense::inverse(&f.info, 2).unwrap();
            (f.theta_hat[1] - 0.5).powi(2) / inv[3]
        })
        .sum();
    let ratio = chi2 / field.n_sites() as f64;
    // χ²_64 / 64 has standard deviation 0.18
    assert!((0.55..1.5).contains(&ratio), "χ²/S = {ratio}");
}

#[test]
fn standardized_errors_are_standard_normal() {
    let synth = synth_generate(&SynthSpec::smooth_default(ModelKind::Mos, 6, 6, 200, 5)).unwrap();
    let data = ModelData::from_ensemble(ModelKind::Mos, &synth.data, 0.0).unwrap();
    let field = fit_field(&data, &FitConfig::default()).unwrap();
    let z = standardized_errors(&field, &synth.truth).unwrap();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.1 && (0.8..1.2).contains(&var), "mean {mean} var {var}");
}

#[test]
fn mle_cv_mse_matches_noise_variance() {
    let synth = synth_generate(&mos_constant(6, 6, 100, 21)).unwrap();
    let data = ModelData::from_ensemble(ModelKind::Mos, &synth.data, 0.0).unwrap();
    let structure = make_structure(&data.grid).unwrap();
    let config = CvConfig::default().with_methods(&[Method::Mle]);
    let report = loo_cv(&data, &structure, &config).unwrap();
    let mse = report.value(Method::Mle, Metric::Mse).unwrap();
    // true noise variance is e^0 = 1
    assert!((mse - 1.0).abs() < 0.1, "cross-validated MSE {mse}");
    assert_eq!(report.n_folds, 100);
    assert!(report.failures.is_empty());
}

fn small_logreg() -> (ModelData, Rw2dStructure<f64>) {
    let synth = synth_generate(&SynthSpec::smooth_default(ModelKind::Logreg, 4, 5, 8, 2)).unwrap();
    let data = ModelData::from_ensemble(ModelKind::Logreg, &synth.data, synth.threshold).unwrap();
    let structure = make_structure(&data.grid).unwrap();
    (data, structure)
}

#[test]
fn cv_is_deterministic() {
    let (data, structure) = small_logreg();
    let config = CvConfig::default().with_methods(&[Method::Mle, Method::MaxSmooth, Method::Independent, Method::Climatology]);
    let a = loo_cv(&data, &structure, &config).unwrap();
    let b = loo_cv(&data, &structure, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.methods.len(), 4);
    assert_eq!(a.fold_kappas.len(), 8);
}

#[test]
fn fold_average_is_mean_of_fold_scores() {
    let (data, structure) = small_logreg();
    let config = CvConfig::default().with_methods(&[Method::Mle, Method::Climatology]);
    let report = loo_cv(&data, &structure, &config).unwrap();
    for m in &report.methods {
        let r = m.report(Metric::Brier).unwrap();
        let mean = r.per_time.iter().sum::<f64>() / r.per_time.len() as f64;
        assert!((mean - r.spatial_mean).abs() < 1e-12);
    }
}

#[test]
fn held_out_data_does_not_reach_the_fold_fit() {
    let (data, structure) = small_logreg();
    let config = CvConfig::default().with_methods(&[Method::MaxSmooth]);
    let a = loo_cv(&data, &structure, &config).unwrap();
    let mut perturbed = data.clone();
    perturbed.y.column_mut(0).mapv_inplace(|e| 1.0 - e);
    let b = loo_cv(&perturbed, &structure, &config).unwrap();
    assert_eq!(a.fold_kappas[0], b.fold_kappas[0]);
    assert_ne!(a.fold_kappas[1], b.fold_kappas[1]);
    let (sa, sb) = (
        a.scores(Method::MaxSmooth).unwrap().report(Metric::Brier).unwrap(),
        b.scores(Method::MaxSmooth).unwrap().report(Metric::Brier).unwrap(),
    );
    assert_ne!(sa.per_time[0], sb.per_time[0]);
}

#[test]
fn failed_fold_is_excluded_and_reported() {
    // site 0 has a varying ensemble mean only at time 0, so MOS cannot be
    // fitted once time 0 is held out
    let grid = GridSpec::regular(2, 2, 0.0, 0.0, 1.0).unwrap();
    let n_t = 6;
    let mut f = Array3::zeros((2, 4, n_t));
    let mut y = Array2::zeros((4, n_t));
    for s in 0..4 {
        for t in 0..n_t {
            let m = if s == 0 { if t == 0 { 3.0 } else { 1.0 } } else { (t * (s + 1)) as f64 % 5.0 };
            f[[0, s, t]] = m - 0.5;
            f[[1, s, t]] = m + 0.5;
            y[[s, t]] = m + 0.1 * ((t * 7 + s * 3) % 4) as f64;
        }
    }
    let times = (0..n_t).map(|t| format!("t{t}")).collect();
    let d = EnsembleDataset::new(grid, times, vec![1, 2], f, y).unwrap();
    let data = ModelData::from_ensemble(ModelKind::Mos, &d, 0.0).unwrap();
    let structure = make_structure(&data.grid).unwrap();
    let report = loo_cv(&data, &structure, &CvConfig::default().with_methods(&[Method::Mle])).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].time, "t0");
    assert!(report.failures[0].message.contains("s=0"), "{}", report.failures[0].message);
    assert_eq!(report.scores(Method::Mle).unwrap().reports[0].per_time.len(), n_t - 1);
}

#[test]
fn logreg_smoothing_improves_recovery() {
    let synth = synth_generate(&SynthSpec::smooth_default(ModelKind::Logreg, 23, 31, 20, 4)).unwrap();
    let config = CvConfig::default().with_methods(&[Method::Mle, Method::MaxSmooth]);
    let report = recovery_experiment(&synth, &config, false).unwrap();
    for p in ["alpha", "beta"] {
        assert!(report.rmse(Method::MaxSmooth, p).unwrap() < report.rmse(Method::Mle, p).unwrap());
    }
}

#[test]
fn mos_slope_is_smoothed_more_than_intercept() {
    let synth = synth_generate(&SynthSpec::smooth_default(ModelKind::Mos, 12, 15, 20, 6)).unwrap();
    let config = CvConfig::default().with_methods(&[Method::Mle, Method::MaxSmooth]);
    let report = recovery_experiment(&synth, &config, false).unwrap();
    assert!(report.rmse(Method::MaxSmooth, "beta").unwrap() <= report.rmse(Method::Mle, "beta").unwrap());
    let (a_ms, a_mle) = (
        report.rmse(Method::MaxSmooth, "alpha").unwrap(),
        report.rmse(Method::Mle, "alpha").unwrap(),
    );
    let (b_ms, b_mle) = (
        report.rmse(Method::MaxSmooth, "beta").unwrap(),
        report.rmse(Method::Mle, "beta").unwrap(),
    );
    assert!(b_ms / b_mle < a_ms / a_mle, "alpha {a_ms}/{a_mle}, beta {b_ms}/{b_mle}");
}

#[test]
fn report_files_have_expected_headers() {
    let (data, structure) = small_logreg();
    let mut report = loo_cv(&data, &structure, &CvConfig::default().with_methods(&[Method::Mle])).unwrap();
    report.recovery.push(RecoveryRow {
        param: "alpha".into(),
        method: "mle".into(),
        rmse: 0.5,
    });
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let first = |f: &str| {
        std::fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(first("scores.csv"), "metric,method,lead_time,value,stderr");
    assert_eq!(first("scores_map.csv"), "metric,method,lat,lon,value");
    assert_eq!(first("pit.csv"), "method,bin_lo,bin_hi,count");
    assert_eq!(first("failures.csv"), "time,message");
    assert_eq!(first("recovery.csv"), "param,method,rmse");
}

#[test]
fn spread_bias_scales_variance_and_shifts_delta() {
    let spec = SynthSpec::smooth_default(ModelKind::Ngr, 3, 4, 10, 1).with_spread_bias(0.5);
    let FieldGenerator::Sinusoidal { mean, .. } = spec.true_fields[3] else {
        panic!("sinusoidal delta expected")
    };
    assert!((mean - 2.0 * 2f64.ln()).abs() < 1e-12);
    let synth = synth_generate(&spec).unwrap();
    let unbiased = synth_generate(&spec.clone().with_spread_bias(1.0)).unwrap();
    let v = |d: &EnsembleDataset| crate::grid_data::summarize_ensemble(d).unwrap().variance.mean().unwrap();
    let ratio = v(&synth.data) / v(&unbiased.data);
    assert!((ratio - 0.25).abs() < 1e-9, "variance ratio {ratio}");
}
