use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn polariton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polariton")).args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

const QUIET: &str = r#""noise": {"kappa_khz": 0.0, "gamma1_khz": 0.0, "gamma2_khz": 0.0}"#;

#[test]
fn gate_trace_starts_in_plus_and_ends_on_target() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &format!(r#"{{{QUIET}, "integrator": {{"samples": 11}}, "sweep": {{"grid_theta": 5, "grid_phi": 2}}}}"#));
    let out = polariton(&["gate", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(table[0], ["time_ns", "p_G", "p_minus", "p_plus", "leakage", "fidelity"]);
    assert_eq!(table.len(), 12);
    let first = &table[1];
    assert_eq!(num(&first[0]), 0.0);
    assert_eq!(num(&first[1]), 0.0);
    assert_eq!(num(&first[3]), 1.0);
    // NOT sends |+⟩ to |−⟩, orthogonal to the initial state.
    assert!(num(&first[5]) < 1e-12);
    assert!(num(&table[11][5]) >= 0.995);
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("state fidelity"), "{summary}");
}

#[test]
fn two_qubit_trace_has_the_extra_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &format!(r#"{{{QUIET}, "integrator": {{"samples": 5}}, "sweep": {{"grid_theta": 3, "grid_phi": 2}}}}"#));
    let out = polariton(&["two-qubit", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(
        table[0],
        ["time_ns", "p_G", "p_minus", "p_plus", "leakage", "fidelity", "p_pp", "p_pm", "p_mp", "p_mm", "p_ancilla"]
    );
    assert_eq!(table.len(), 6);
    // Starts in |−+⟩ and ends in |−−⟩.
    assert_eq!(num(&table[1][8]), 1.0);
    assert!(num(&table[5][9]) > 0.99);
    assert!(num(&table[5][5]) > 0.99);
}

#[test]
fn sweep_rows_follow_the_configured_points() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"sweep": {"points": 5, "grid_theta": 3, "grid_phi": 2}}"#);
    let csv = dir.path().join("z.csv");
    let out = polariton(&["sweep-z", "--config", &cfg, "--output", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let table = rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(table[0], ["fraction", "polariton_dct", "polariton_single_loop", "baseline_nhqc"]);
    assert_eq!(table.len(), 6);
    let fractions: Vec<f64> = table[1..].iter().map(|r| num(&r[0])).collect();
    assert_eq!(fractions.first(), Some(&-0.1));
    assert_eq!(fractions.last(), Some(&0.1));
    assert!(fractions.windows(2).all(|w| w[1] > w[0]));
    for r in &table[1..] {
        for v in &r[1..] {
            let f = num(v);
            assert!(f > 0.9 && f <= 1.0, "{f}");
        }
    }
}

#[test]
fn decoherence_sweep_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &format!(r#"{{{QUIET}, "sweep": {{"gamma_khz": [0.0]}}}}"#));
    let out = polariton(&["sweep-decoherence", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(table[0], ["gamma_khz", "cnot"]);
    assert_eq!(table.len(), 2);
    assert!(num(&table[1][1]) >= 0.99);
}

#[test]
fn spectrum_reports_the_doublet_and_the_noise_table() {
    let out = polariton(&["spectrum"]);
    assert!(out.status.success());
    let table = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(table[0][0], "axis");
    assert_eq!(table.len(), 11);
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("omega_- 7.6"), "{summary}");
}

fn sweep_x_with_threads(dir: &TempDir, cfg: &str, threads: &str) -> Vec<u8> {
    let csv = dir.path().join(format!("x{threads}.csv"));
    let out = Command::new(env!("CARGO_BIN_EXE_polariton"))
        .args(["sweep-x", "--config", cfg, "--output", csv.to_str().unwrap()])
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(csv).unwrap()
}

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"sweep": {"points": 4, "grid_theta": 3, "grid_phi": 2, "schemes": ["polariton-dct", "baseline-nhqc"]}}"#);
    let one = sweep_x_with_threads(&dir, &cfg, "1");
    let four = sweep_x_with_threads(&dir, &cfg, "4");
    let again = sweep_x_with_threads(&dir, &cfg, "4");
    assert_eq!(one, four);
    assert_eq!(four, again);
    assert!(String::from_utf8(one).unwrap().starts_with("fraction,polariton_dct,baseline_nhqc\n"));
}

#[test]
fn effective_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"drive": {"envelope": "sin2"}, "integrator": {"samples": 7}}"#);
    let printed = polariton(&["--config", &cfg, "--dct", "off", "--print-effective-config"]);
    assert!(printed.status.success());
    let effective = String::from_utf8(printed.stdout).unwrap();
    let value: serde_json::Value = serde_json::from_str(&effective).unwrap();
    assert_eq!(value["drive"]["dct"], "off");
    assert_eq!(value["drive"]["envelope"], "sin2");
    assert_eq!(value["integrator"]["samples"], 7);
    let full = write_config(&dir, "full.json", &effective);

    let a = polariton(&["gate", "--config", &cfg, "--dct", "off"]);
    let b = polariton(&["gate", "--config", &full]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let reprinted = polariton(&["--config", &full, "--print-effective-config"]);
    assert_eq!(String::from_utf8(reprinted.stdout).unwrap(), effective);
}

#[test]
fn flags_override_the_config() {
    let out = polariton(&["--frame", "rotating", "--dct", "off", "--print-effective-config"]);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["integrator"]["frame"], "rotating");
    assert_eq!(value["drive"]["dct"], "off");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| polariton(args).status.code();

    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["no-such-command"]), Some(1));
    assert_eq!(code(&[]), Some(1));
    assert_eq!(code(&["gate", "--config", "/nonexistent/config.json"]), Some(1));

    let unknown = write_config(&dir, "unknown.json", "{\n  \"drive\": {\"omega0\": 1}\n}");
    let out = polariton(&["gate", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let bad = write_config(&dir, "bad.json", r#"{"sweep": {"points": 1}}"#);
    assert_eq!(code(&["sweep-z", "--config", &bad]), Some(1));
    let negative = write_config(&dir, "neg.json", r#"{"system": {"omega_c_ghz": -8}}"#);
    assert_eq!(code(&["spectrum", "--config", &negative]), Some(1));

    // Steps below the resolution floor are a configuration error; identical pairs have no ancilla transition.
    let coarse = write_config(&dir, "coarse.json", r#"{"integrator": {"steps_per_carrier_period": 10}}"#);
    assert_eq!(code(&["gate", "--config", &coarse]), Some(1));
    let same = write_config(&dir, "same.json", r#"{"system": {"two_qubit": {"right": {"omega_q_ghz": 7.8, "omega_c_ghz": 7.8, "g_over_omega_q": 0.05}}}}"#);
    assert_eq!(code(&["two-qubit", "--config", &same]), Some(1));

    let unwritable = Path::new("/nonexistent/dir/out.csv");
    assert_eq!(code(&["spectrum", "--output", unwritable.to_str().unwrap()]), Some(1));
}

#[test]
fn validate_passes_on_defaults() {
    let out = polariton(&["validate"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
