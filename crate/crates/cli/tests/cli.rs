use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const RANGE: [&str; 4] = ["--from", "2018-01-01", "--to", "2018-12-31"];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crashrisk"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn ok_owned(args: &[String]) -> String {
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn ingest_args(crash: &str, weather: &str, out: &str) -> Vec<String> {
    let mut args: Vec<String> = ["ingest", "--crash", crash, "--weather", weather, "--out", out]
        .map(String::from)
        .to_vec();
    args.extend(RANGE.map(String::from));
    args
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic raw files and the grid built from them.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let d = |rel: &str| dir.path().join(rel).to_str().unwrap().to_string();
        let mut synth = vec!["synth".to_string(), "--seed".into(), "3".into(), "--out".into(), d("raw")];
        synth.extend(RANGE.map(String::from));
        ok_owned(&synth);
        ok_owned(&ingest_args(&d("raw/crashes.csv"), &d("raw/weather.csv"), &d("grid")));
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

fn config_echo(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap()
}

#[test]
fn ingest_grid_is_complete_and_reproducible() {
    let fx = Fixture::new();
    let grid = std::fs::read_to_string(fx.path("grid/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 8760 + 1);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(fx.path("grid/ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["grid_rows"], 8760);
    let echo = config_echo(&fx.path("grid"));
    assert_eq!(echo["command"], "ingest");
    assert_eq!(echo["inputs"]["crash"]["sha256"].as_str().unwrap().len(), 64);

    ok_owned(&ingest_args(
        p(&fx.path("raw/crashes.csv")),
        p(&fx.path("raw/weather.csv")),
        p(&fx.path("again")),
    ));
    assert_eq!(std::fs::read(fx.path("again/grid.csv")).unwrap(), grid.as_bytes());
}

#[test]
fn missing_weather_date_is_a_data_error() {
    let fx = Fixture::new();
    let weather = std::fs::read_to_string(fx.path("raw/weather.csv")).unwrap();
    let gapped: String = weather
        .lines()
        .filter(|l| !l.starts_with("2018-03-14"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_ne!(gapped.len(), weather.len());
    std::fs::write(fx.path("gapped.csv"), gapped).unwrap();
    let args = ingest_args(p(&fx.path("raw/crashes.csv")), p(&fx.path("gapped.csv")), p(&fx.path("x")));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    let err = error_line(&out);
    assert_eq!(err["error"], "data");
    assert!(err["message"].as_str().unwrap().contains("2018-03-14"));
}

#[test]
fn fit_escalates_and_writes_tables() {
    let fx = Fixture::new();
    let grid = fx.path("grid/grid.csv");
    let out_dir = fx.path("fit");
    let stdout = ok(&["fit", "--grid", p(&grid), "--out", p(&out_dir), "--json"]);
    let report: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["family"], "negbin2");
    assert_eq!(report["dispersion"]["overdispersed"], true);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "name,coefficient,exp_coef,percent_change,std_err,z,p_value,crash_total,crash_share"
    );
    for name in ["coefficients_hour.csv", "coefficients_weekday.csv", "coefficients_month.csv", "dispersion.json", "model.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let hours = std::fs::read_to_string(out_dir.join("coefficients_hour.csv")).unwrap();
    assert_eq!(hours.lines().count(), 25);
    assert_eq!(config_echo(&out_dir)["command"], "fit");

    let forced = fx.path("poisson");
    let stdout = ok(&["fit", "--grid", p(&grid), "--out", p(&forced), "--family", "poisson", "--json"]);
    let report: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["family"], "poisson");
}

#[test]
fn forest_outputs_and_determinism() {
    let fx = Fixture::new();
    let grid = fx.path("grid/grid.csv");
    let (a, b) = (fx.path("fa"), fx.path("fb"));
    for dir in [&a, &b] {
        ok(&["forest", "--grid", p(&grid), "--sweep", "1,3", "--out", p(dir)]);
    }
    assert_eq!(
        std::fs::read(a.join("forest.json")).unwrap(),
        std::fs::read(b.join("forest.json")).unwrap()
    );
    let sweep = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "n_trees,mae,r2");
    assert_eq!(sweep.lines().count(), 3);
    let total: f64 = std::fs::read_to_string(a.join("importance.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn rank_enumerates_and_matches_across_formats() {
    let fx = Fixture::new();
    let fit_dir = fx.path("fit");
    ok(&["fit", "--grid", p(&fx.path("grid/grid.csv")), "--out", p(&fit_dir)]);
    let model = fit_dir.join("model.json");
    let stdout = ok(&["rank", "--model", p(&model), "--month", "6", "--json"]);
    let ranked: Value = serde_json::from_str(stdout.trim()).unwrap();
    let rows = ranked.as_array().unwrap();
    assert_eq!(rows.len(), 168);
    assert_eq!(rows[0]["rank"], 1);
    assert_eq!(rows[0]["relative_risk"], 1.0);
    let expected: Vec<f64> = rows.iter().map(|r| r["expected_count"].as_f64().unwrap()).collect();
    assert!(expected.windows(2).all(|w| w[0] <= w[1]));

    let human = ok(&["rank", "--model", p(&model), "--slot", "FR:2:10", "--slot", "TU:11:2"]);
    let first_row = human.lines().nth(1).unwrap();
    assert!(first_row.contains("TU"), "{human}");

    let out = run(&["rank", "--model", p(&model), "--slot", "MO:24:6"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");
}

#[test]
fn config_file_with_flag_override() {
    let fx = Fixture::new();
    let cfg = fx.path("run.json");
    std::fs::write(&cfg, r#"{"seed": 11, "family": "poisson", "split_frac": 0.3}"#).unwrap();
    let out_dir = fx.path("cfgfit");
    let stdout = ok(&[
        "fit",
        "--config",
        p(&cfg),
        "--family",
        "negbin",
        "--grid",
        p(&fx.path("grid/grid.csv")),
        "--out",
        p(&out_dir),
        "--json",
    ]);
    let report: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["family"], "negbin2");
    let echo = config_echo(&out_dir);
    assert_eq!(echo["config"]["seed"], 11);
    assert_eq!(echo["config"]["split_frac"], 0.3);
    assert_eq!(echo["config"]["family"], "negbin");

    std::fs::write(&cfg, r#"{"seeed": 11}"#).unwrap();
    let out = run(&["fit", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2_with_one_json_line() {
    for args in [
        vec!["bogus"],
        vec!["fit", "--coding", "wrong"],
        vec!["fit", "--split-frac", "1.5", "--out", "x"],
        vec!["forest", "--sweep", "5,1", "--out", "x"],
        vec!["rank", "--month", "6"],
    ] {
        let out = run(&args);
        let err = error_line(&out);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {err}");
        assert_eq!(err["error"], "usage");
    }
}
