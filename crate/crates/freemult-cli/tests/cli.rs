//! End-to-end runs of the `freemult` binary: output contracts and exit codes.

use freemult::{Atom, Measure, Space};
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn freemult(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freemult"))
        .current_dir(dir)
        .env_remove("FREEMULT_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = freemult(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// (metadata lines, node/value rows) of a profile CSV.
fn read_csv(path: &Path) -> (Vec<String>, Vec<(f64, f64)>) {
    let text = std::fs::read_to_string(path).unwrap();
    let meta = text.lines().filter(|l| l.starts_with('#')).map(str::to_string).collect();
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    (meta, rows)
}

fn trapezoid(rows: &[(f64, f64)]) -> f64 {
    rows.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum()
}

#[test]
fn lambda_at_four_vanishes_at_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--grid", "512", "density", "--law", "lambda", "--t", "4", "--out", "l.csv"]);
    let (_, rows) = read_csv(&dir.path().join("l.csv"));
    let at_pi = rows.iter().filter(|r| (r.0.abs() - PI).abs() < 1e-12).collect::<Vec<_>>();
    assert!(!at_pi.is_empty());
    assert!(at_pi.iter().all(|r| r.1 <= 1e-6));
}

#[test]
fn chi_density_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["density", "--law", "chi", "--t", "1", "--out", "c.csv"]);
    let (meta, rows) = read_csv(&dir.path().join("c.csv"));
    assert!(meta.iter().any(|m| m == "# law: chi"));
    let mass = trapezoid(&rows);
    assert!((mass - 1.0).abs() <= 1e-6, "mass {mass}");
}

#[test]
fn haar_density_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--grid", "128", "density", "--law", "haar", "--out", "h.csv"]);
    let (_, rows) = read_csv(&dir.path().join("h.csv"));
    assert_eq!(rows.len(), 128);
    assert!(rows.iter().all(|r| r.1 == 1.0 / (2.0 * PI)));
}

#[test]
fn free_product_of_atoms_is_an_atom() {
    let dir = tempfile::tempdir().unwrap();
    let a = Measure::atomic(Space::Halfline, vec![Atom { pos: 2.0, mass: 1.0 }], "a").unwrap();
    let b = Measure::atomic(Space::Halfline, vec![Atom { pos: 1.5, mass: 1.0 }], "b").unwrap();
    std::fs::write(dir.path().join("a.json"), a.to_json()).unwrap();
    std::fs::write(dir.path().join("b.json"), b.to_json()).unwrap();
    ok(dir.path(), &["--grid", "256", "convolve", "--free", "a.json", "b.json", "--out", "p.csv", "--measure-out", "p.json"]);
    let p = Measure::parse(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(p.atoms.len(), 1);
    assert!((p.atoms[0].pos - 3.0).abs() <= 1e-6 && (p.atoms[0].mass - 1.0).abs() <= 1e-6, "{:?}", p.atoms);
    let (meta, _) = read_csv(&dir.path().join("p.csv"));
    assert!(meta.iter().any(|m| m.starts_with("# atoms:")));
}

#[test]
fn eighth_power_of_lambda_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--grid", "512", "density", "--law", "lambda", "--t", "0.125", "--out", "l8.csv", "--measure-out", "lambda_0125.json"]);
    ok(d, &["--grid", "512", "power", "--free", "--k", "8", "lambda_0125.json", "--out", "p.csv"]);
    ok(d, &["--grid", "512", "density", "--law", "lambda", "--t", "1", "--out", "l1.csv"]);
    let (_, p) = read_csv(&d.join("p.csv"));
    let (_, l) = read_csv(&d.join("l1.csv"));
    assert_eq!(p.len(), l.len());
    let worst = p.iter().zip(&l).map(|(a, b)| (a.1 - b.1).abs()).fold(0.0, f64::max);
    assert!(worst <= 5e-3, "sup difference {worst}");
}

#[test]
fn haar_experiment_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["experiment", "haar", "--mean", "0.9", "--nmax", "64", "--out", "rep"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("haar: pass"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep/haar.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"]["verdict"], "pass");
    assert!(dir.path().join("rep/haar_64.csv").exists());
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["density", "--law", "chi"][..],
        &["density", "--law", "chi", "--t", "-1"][..],
        &["--grid", "8", "density", "--law", "haar"][..],
        &["experiment", "haar", "--mean", "1.5"][..],
        &["power", "--free", "--k", "0", "missing.json"][..],
    ] {
        let out = freemult(d, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
    std::fs::write(d.join("bad.json"), r#"{"grid": 16}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_freemult"))
        .current_dir(d)
        .env("FREEMULT_CONFIG", "bad.json")
        .args(["density", "--law", "haar"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--grid", "256", "density", "--law", "chi", "--t", "4", "--out", "c.csv", "--measure-out", "chi4.json"]);
    let out = freemult(d, &["--grid", "256", "power", "--boolean", "--k", "16", "chi4.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not"));
}
