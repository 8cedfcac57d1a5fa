use std::path::Path;
use std::process::{Command, Output};

const CHANNEL: &str = r#""channel": {"w1": [[0.9, 0.1], [0.1, 0.9]], "w2": [[0.8, 0.2], [0.2, 0.8]]}"#;
const ENSEMBLE: &str = r#""ensemble": {"p_u": [0.5, 0.5], "p_x_given_u": [[0.85, 0.15], [0.15, 0.85]]}"#;

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn abcx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abcx")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses the simulator CSV (after its `# seed` line) into header and rows.
fn sim_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn exponent_without_bounds_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &format!("{{{CHANNEL}}}"));
    let o = abcx(&["exponent", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("ry_nats,rz_nats,bound"));
}

#[test]
fn exponent_writes_to_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{{CHANNEL}, {ENSEMBLE}, "rates": {{"r_y": [0.0, 0.05], "r_z": [0.02]}}, "bounds": ["rc-weak", "rc-strong"]}}"#
        ),
    );
    let out = dir.path().join("e.csv");
    let o = abcx(&["exponent", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn missing_or_malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(abcx(&["exponent"]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(
        abcx(&["exponent", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let cfg = write_config(dir.path(), "c.json", &format!(r#"{{{CHANNEL}, "colour": "red"}}"#));
    assert_eq!(abcx(&["exponent", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(
        dir.path(),
        "d.json",
        &format!(r#"{{{CHANNEL}, "ensemble": {{"p_u": [0.7, 0.7], "p_x_given_u": [[1.0]]}}}}"#),
    );
    assert_eq!(abcx(&["exponent", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn invalid_channel_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"channel": {"w1": [[0.9, 0.2], [0.1, 0.9]], "w2": [[0.8, 0.2], [0.2, 0.8]]}, "bounds": ["rc-weak"]}"#,
    );
    let o = abcx(&["exponent", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn compare_needs_two_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{{CHANNEL}, "bounds": ["rc-weak", "rc-weak"]}}"#),
    );
    assert_eq!(abcx(&["compare", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn compare_ranks_and_writes_chart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{{CHANNEL}, {ENSEMBLE}, "rates": {{"r_y": [0.0, 0.05], "r_z": [0.0]}},
               "bounds": ["rc-weak", "gld-weak"], "metric": {{"kind": "mutual-info", "beta": 1.0}}}}"#
        ),
    );
    let (csv, svg) = (dir.path().join("c.csv"), dir.path().join("c.svg"));
    let o = abcx(&[
        "compare",
        "--config",
        &cfg,
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
        "--units",
        "bits",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    assert!(table.contains("bits"));
    assert!(!table.contains("VIOLATION"));
    let chart = std::fs::read_to_string(svg).unwrap();
    assert!(chart.starts_with("<svg") && chart.contains("polyline"));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 5);
}

#[test]
fn verify_with_impossible_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{{CHANNEL}, {ENSEMBLE}, "verify": {{"tolerance": 1e-12, "ops": ["rc-weak", "phi"]}}}}"#),
    );
    let o = abcx(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], false);
    assert!(v["failed"].as_u64().unwrap() > 0);
}

#[test]
fn verify_passes_with_default_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{{CHANNEL}, {ENSEMBLE}, "verify": {{"ops": ["e1", "k"]}}}}"#),
    );
    let o = abcx(&["verify", "--config", &cfg, "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["passed"], true);
}

#[test]
fn noiseless_channel_simulates_without_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"channel": {{"w1": [[1.0, 0.0], [0.0, 1.0]], "w2": [[1.0, 0.0], [0.0, 1.0]]}}, {ENSEMBLE},
               "rates": {{"r_y": [0.05], "r_z": [0.05]}}, "simulate": {{"n": [10], "trials": 50}}}}"#
        ),
    );
    let o = abcx(&["simulate", "--config", &cfg, "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = sim_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][col(&h, "max_error")].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn exhaustive_error_lies_inside_the_monte_carlo_interval() {
    let dir = tempfile::tempdir().unwrap();
    let body = |exhaustive: bool| {
        format!(
            r#"{{{CHANNEL}, {ENSEMBLE}, "rates": {{"r_y": [0.1], "r_z": [0.1]}},
               "simulate": {{"n": [8], "trials": 4000, "decoder": "bin", "exhaustive": {exhaustive}}}}}"#
        )
    };
    let exact = abcx(&[
        "simulate",
        "--config",
        &write_config(dir.path(), "x.json", &body(true)),
        "--seed",
        "3",
    ]);
    let mc = abcx(&[
        "simulate",
        "--config",
        &write_config(dir.path(), "m.json", &body(false)),
        "--seed",
        "3",
    ]);
    assert_eq!((exact.status.code(), mc.status.code()), (Some(0), Some(0)));
    let (h, ex) = sim_rows(&stdout(&exact));
    let (_, mc) = sim_rows(&stdout(&mc));
    let avg = col(&h, "avg_error");
    let (p, q) = (ex[0][avg].parse::<f64>().unwrap(), mc[0][avg].parse::<f64>().unwrap());
    let hw = mc[0][col(&h, "avg_half_width")].parse::<f64>().unwrap();
    // Same seed, same code: the estimate must cover the exact value at a
    // slightly widened interval.
    assert_eq!(ex[0][col(&h, "mode")], "exact");
    assert!((p - q).abs() <= 1.5 * hw + 1e-12, "exact {p} vs estimate {q} +- {hw}");
}

#[test]
fn simulation_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{{CHANNEL}, {ENSEMBLE}, "rates": {{"r_y": [0.1, 0.2], "r_z": [0.1]}}, "simulate": {{"n": [6, 9], "trials": 100}}}}"#
        ),
    );
    let run = |seed: &str| stdout(&abcx(&["simulate", "--config", &cfg, "--seed", seed, "--jobs", "2"]));
    let a = run("11");
    assert_eq!(a, run("11"));
    assert_ne!(a, run("12"));
    assert!(a.starts_with("# seed=11\n"));
}

#[test]
fn oversized_simulation_exceeds_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{{CHANNEL}, {ENSEMBLE}, "rates": {{"r_y": [0.3], "r_z": [0.3]}}, "simulate": {{"n": [40], "trials": 100000000}}}}"#
        ),
    );
    assert_eq!(abcx(&["simulate", "--config", &cfg]).status.code(), Some(4));
}
