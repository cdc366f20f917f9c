//! `--help` output of every command against checked-in golden files.
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p maxsmooth-cli --test golden`.

use std::path::PathBuf;
use std::process::Command;

fn check(name: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_maxsmooth"))
        .args(args)
        .env_remove("MAXSMOOTH_THREADS")
        .env("COLUMNS", "100")
        .output()
        .unwrap();
    assert!(out.status.success());
    let help = String::from_utf8(out.stdout).unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &help).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(help, want, "help for `{name}` changed");
}

/// Every option that has a default must show it.
fn defaults_listed(args: &[&str], flags: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_maxsmooth")).args(args).output().unwrap();
    let help = String::from_utf8(out.stdout).unwrap();
    for flag in flags {
        let line = help
            .lines()
            .skip_while(|l| !l.trim_start().starts_with(flag))
            .take(3)
            .collect::<Vec<_>>()
            .join(" ");
        assert!(line.contains("[default: "), "{flag} has no default in:\n{help}");
    }
}

#[test]
fn top_level_help() {
    check("maxsmooth", &["--help"]);
}

#[test]
fn fit_help() {
    check("fit", &["fit", "--help"]);
    defaults_listed(&["fit", "--help"], &["--threshold", "--ridge", "--seed"]);
}

#[test]
fn smooth_help() {
    check("smooth", &["smooth", "--help"]);
    defaults_listed(&["smooth", "--help"], &["--method", "--mu-theta", "--kappa-rate"]);
}

#[test]
fn cv_help() {
    check("cv", &["cv", "--help"]);
    defaults_listed(
        &["cv", "--help"],
        &["--methods", "--threshold", "--ridge", "--seed", "--kappa-rate", "--pit-bins", "--warm-start"],
    );
}

#[test]
fn synth_help() {
    check("synth", &["synth", "--help"]);
    defaults_listed(
        &["synth", "--help"],
        &["--model", "--rows", "--cols", "--times", "--members", "--threshold", "--spread-bias", "--seed"],
    );
}

#[test]
fn verify_help() {
    check("verify", &["verify", "--help"]);
    defaults_listed(&["verify", "--help"], &["--threshold", "--pit-bins"]);
}
