use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use netspline::netspline_core::{builtin, BinLayout};

fn netspline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netspline"))
        .arg("-q")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = netspline(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn missing_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = netspline(&[
        "fit", "--network", "builtin", "--points", "/nonexistent/points.csv",
        "--delta", "0.05", "--h", "0.01", "--out", s(&dir.path().join("fit.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    assert!(out.stdout.is_empty());
}

#[test]
fn bin_width_above_knot_distance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    ok(&["simulate", "--network", "builtin", "--n", "20", "--out", s(&pts)]);
    let fit = dir.path().join("fit.json");
    let out = netspline(&["fit", "--network", "builtin", "--points", s(&pts), "--delta", "0.01", "--h", "0.05", "--out", s(&fit)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!fit.exists());
}

#[test]
fn simulate_zero_points_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    ok(&["simulate", "--network", "builtin", "--n", "0", "--out", s(&pts)]);
    let text = fs::read_to_string(&pts).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(), ["edge_id,offset"]);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    for (path, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        ok(&["simulate", "--network", "builtin", "--spec", "exp-decay", "--n", "200", "--seed", seed, "--out", s(path)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn fit_eval_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pts = d.join("pts.csv");
    ok(&["simulate", "--network", "builtin", "--spec", "exp-decay", "--n", "150", "--out", s(&pts)]);
    let summary = ok(&[
        "fit", "--network", "builtin", "--points", s(&pts), "--delta", "0.05", "--h", "0.01",
        "--out", s(&d.join("fit.json")), "--dump", s(&d.join("dump.csv")),
    ]);
    let line: serde_json::Value = serde_json::from_str(summary.trim()).unwrap();
    assert!(line["rho"].as_f64().unwrap() > 0.0);
    assert!(line["edf"].as_f64().unwrap() > 0.0);
    assert!((line["fitted_mass"].as_f64().unwrap() - 150.0).abs() < 1e-6);
    // Default dump: one row per bin midpoint.
    let bins = BinLayout::with_width(&builtin::simple_network(), 0.01).total();
    assert_eq!(data_rows(&d.join("dump.csv")).len(), bins);

    ok(&["eval", "--fit", s(&d.join("fit.json")), "--step", "0.5", "--out", s(&d.join("eval.csv"))]);
    assert!(!data_rows(&d.join("eval.csv")).is_empty());

    let ratio = d.join("ratio.csv");
    let fit = s(&d.join("fit.json")).to_string();
    ok(&["ratio", "--num", &fit, "--den", &fit, "--floor", "1e-9", "--out", s(&ratio)]);
    for row in data_rows(&ratio) {
        let r: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }
    ok(&["ratio", "--num", &fit, "--den", &fit, "--floor", "1e9", "--out", s(&ratio)]);
    assert!(data_rows(&ratio).iter().all(|r| r.ends_with(",NA")));
}

#[test]
fn ratio_of_fits_on_different_networks_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let net = d.join("line.json");
    fs::write(
        &net,
        r#"{"version": 1, "vertices": [[0, 0], [1, 0]], "edges": [{"from": 0, "to": 1, "polyline": [[0, 0], [1, 0]]}]}"#,
    )
    .unwrap();
    let (pa, pb) = (d.join("a.csv"), d.join("b.csv"));
    ok(&["simulate", "--network", "builtin", "--n", "30", "--out", s(&pa)]);
    ok(&["simulate", "--network", s(&net), "--n", "30", "--out", s(&pb)]);
    let (fa, fb) = (d.join("a.json"), d.join("b.json"));
    ok(&["fit", "--network", "builtin", "--points", s(&pa), "--delta", "0.1", "--h", "0.05", "--out", s(&fa)]);
    ok(&["fit", "--network", s(&net), "--points", s(&pb), "--delta", "0.1", "--h", "0.05", "--out", s(&fb)]);
    let out = netspline(&["ratio", "--num", s(&fa), "--den", s(&fb), "--floor", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_settings_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pts = d.join("pts.csv");
    ok(&["simulate", "--network", "builtin", "--n", "60", "--out", s(&pts)]);
    let cfg = d.join("cfg.json");
    fs::write(&cfg, r#"{"delta": 0.1, "h": 0.05, "fixed_rho": 3.0}"#).unwrap();
    let a = ok(&["--config", s(&cfg), "fit", "--network", "builtin", "--points", s(&pts), "--out", s(&d.join("a.json"))]);
    let a: serde_json::Value = serde_json::from_str(a.trim()).unwrap();
    assert_eq!(a["rho"].as_f64(), Some(3.0));
    let b = ok(&[
        "--config", s(&cfg), "fit", "--network", "builtin", "--points", s(&pts), "--fixed-rho", "7",
        "--out", s(&d.join("b.json")),
    ]);
    let b: serde_json::Value = serde_json::from_str(b.trim()).unwrap();
    assert_eq!(b["rho"].as_f64(), Some(7.0));

    fs::write(&cfg, r#"{"delta": 0.1, "bogus": 1}"#).unwrap();
    let out = netspline(&["--config", s(&cfg), "fit", "--network", "builtin", "--points", s(&pts), "--h", "0.05", "--out", s(&d.join("c.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

fn study_args<'a>(out: &'a str, seed: &'a str) -> Vec<&'a str> {
    vec![
        "study", "--network", "builtin", "--spec", "exp-decay", "--n-list", "20,50", "--replicates", "6",
        "--seed", seed, "--delta", "0.1", "--h", "0.05", "--out", out,
    ]
}

#[test]
fn study_resumes_after_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    let cut = dir.path().join("cut");
    ok(&study_args(s(&full), "3"));
    ok(&study_args(s(&cut), "3"));
    let report = fs::read(full.join("report.json")).unwrap();
    assert_eq!(fs::read(cut.join("report.json")).unwrap(), report);

    // Keep the stamp, the header, four rows and half of the fifth.
    let log = fs::read_to_string(cut.join("replicates.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    let mut torn = lines[..6].join("\n");
    torn.push('\n');
    torn.push_str(&lines[6][..lines[6].len() / 2]);
    fs::write(cut.join("replicates.csv"), torn).unwrap();
    fs::remove_file(cut.join("report.json")).unwrap();

    let mut args = study_args(s(&cut), "3");
    args.push("--resume");
    ok(&args);
    assert_eq!(fs::read(cut.join("report.json")).unwrap(), report);
    assert_eq!(
        fs::read(cut.join("replicates.csv")).unwrap(),
        fs::read(full.join("replicates.csv")).unwrap()
    );

    let mut other = study_args(s(&cut), "4");
    other.push("--resume");
    assert_eq!(netspline(&other).status.code(), Some(2));
}

#[test]
fn study_writes_replicate_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let stdout = ok(&study_args(s(&out), "1"));
    assert_eq!(stdout.lines().count(), 2);
    let rows = data_rows(&out.join("replicates.csv"));
    assert_eq!(rows.len(), 12);
    let header = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert!(header.contains("n,replicate,seed,ise,rho_hat,converged"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["summary"].as_array().unwrap().len(), 2);
}

#[test]
fn sensitivity_table_has_the_twelve_cell_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sens");
    let stdout = ok(&[
        "sensitivity", "--network", "builtin", "--n", "30", "--deltas", "0.1,0.05,0.01",
        "--hs", "0.1,0.05,0.01,0.005", "--replicates", "2", "--out", s(&out),
    ]);
    assert_eq!(stdout.lines().count(), 9);
    let rows = data_rows(&out.join("sensitivity.csv"));
    assert_eq!(rows.len(), 3);
    let cells: Vec<Vec<&str>> = rows.iter().map(|r| r.split(',').skip(1).collect()).collect();
    assert!(cells.iter().all(|r| r.len() == 4));
    let dashes: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, c)| **c == "—").map(move |(j, _)| (i, j)))
        .collect();
    assert_eq!(dashes, [(1, 0), (2, 0), (2, 1)]);
}
