use std::path::PathBuf;

use maxsmooth::experiments::independent_kappas;
use maxsmooth::hyperparams::{
    estimate_kappa_with, write_independent_kappa_trace, write_kappa_trace, HyperEstimate, KappaPrior, KappaProblem,
    KappaSearch,
};
use maxsmooth::likelihoods::read_mle_field;
use maxsmooth::smoother::{smooth, write_smooth_result, SmoothMethod};
use maxsmooth::spatial_prior::{make_structure, PriorSpec};
use serde::Serialize;

use super::{create_out_dir, snapshot};
use crate::args::{MuTheta, SmoothArgs, SmoothMethodArg};
use crate::config::{parse_enum, required, FileConfig, Layers};
use crate::manifest::{unix_now, RunManifest};
use crate::CliError;

const KEYS: &[&str] = &["input", "out", "method", "kappa", "mu_theta", "kappa_rate"];

#[derive(Serialize)]
struct Resolved {
    input: PathBuf,
    out: PathBuf,
    method: String,
    kappa: Vec<f64>,
    mu_theta: String,
    kappa_rate: f64,
}

pub fn run(args: &SmoothArgs, layers: &Layers) -> Result<(), CliError> {
    let started = unix_now();
    let file = FileConfig::load_opt(args.config.as_deref(), "smooth", KEYS)?;
    let method_arg = match &file.method {
        Some(s) => layers.pick("method", args.method, Some(parse_enum::<SmoothMethodArg>(s, "method")?)),
        None => args.method,
    };
    if let Some(s) = &file.mu_theta {
        parse_enum::<MuTheta>(s, "mu_theta")?;
    }
    let method: SmoothMethod = method_arg.into();
    let cfg = Resolved {
        input: required(args.input.clone().or(file.input), "input")?,
        out: required(args.out.clone().or(file.out), "out")?,
        method: method.name().to_string(),
        kappa: layers.pick("kappa", args.kappa.clone(), file.kappa),
        mu_theta: "zero".into(),
        kappa_rate: layers.pick("kappa_rate", args.kappa_rate, file.kappa_rate),
    };

    let estimates = cfg.input.join("estimates.csv");
    let info = cfg.input.join("info.csv");
    let field = read_mle_field(&estimates, &info)?;
    let params = field.kind.param_names();
    if !cfg.kappa.is_empty() && cfg.kappa.len() != params.len() {
        return Err(CliError::input(format!(
            "--kappa needs {} values for {} ({}), got {}",
            params.len(),
            field.kind,
            params.join(","),
            cfg.kappa.len()
        )));
    }
    let structure = make_structure::<f64>(&field.grid)?;
    let prior = KappaPrior::new(cfg.kappa_rate)?;
    let search = KappaSearch::default();

    create_out_dir(&cfg.out)?;
    let trace_path = cfg.out.join("kappa_trace.csv");
    let kappas = if !cfg.kappa.is_empty() {
        let fixed = HyperEstimate {
            kappa_hat: cfg.kappa.clone(),
            objective_value: f64::NAN,
            iterations: 0,
            converged: true,
            trace: Vec::new(),
        };
        write_kappa_trace(&fixed, params, &trace_path)?;
        cfg.kappa.clone()
    } else {
        match method {
            SmoothMethod::Full => {
                let problem = KappaProblem::from_field(&field, &structure)?;
                let est = estimate_kappa_with(&problem, &prior, &search)?;
                write_kappa_trace(&est, params, &trace_path)?;
                est.kappa_hat
            }
            SmoothMethod::DiagonalIndependent => {
                let ests = independent_kappas(&field, &structure, &prior, &search)?;
                write_independent_kappa_trace(&ests, params, &trace_path)?;
                ests.into_iter().map(|e| e.kappa_hat[0]).collect()
            }
        }
    };
    let spec = PriorSpec::new(structure, kappas.clone());
    let result = smooth(&field, &spec, method)?;
    eprintln!(
        "smooth: {} method, kappa = [{}]",
        method,
        kappas.iter().map(|k| format!("{k:.6e}")).collect::<Vec<_>>().join(", ")
    );
    if !result.floored_sites.is_empty() {
        eprintln!(
            "smooth: information floored at {} grid points",
            result.floored_sites.len()
        );
    }
    write_smooth_result(&result, &cfg.out.join("smoothed.csv"))?;

    let mut manifest = RunManifest::new("smooth", 0, snapshot(&cfg), started);
    manifest.add_input(&estimates)?;
    manifest.add_input(&info)?;
    manifest.finish(&cfg.out, &["smoothed.csv".into(), "kappa_trace.csv".into()])?;
    Ok(())
}
