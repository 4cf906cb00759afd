use std::process::{Command, Output};

use serde_json::Value;

fn onr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = onr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

#[test]
fn design_with_reference_rates_reports_eighteen_percent() {
    let r = json(&["design"]);
    assert!(
        close(&r["transmission"], 0.181, 0.001),
        "{}",
        r["transmission"]
    );
    assert_eq!(r["status"], "nonreciprocal window");
}

#[test]
fn optimized_design_reaches_matched_transmission() {
    let r = json(&[
        "design",
        "--optimize",
        "--kappa-mhz",
        "3.7",
        "--kappa-loss-mhz",
        "0.4",
    ]);
    assert!(
        close(&r["transmission"], 0.784, 0.001),
        "{}",
        r["transmission"]
    );
    assert!(close(&r["rates_mhz"]["kappa1"], 1.85, 1e-9));
    assert!(close(&r["rates_mhz"]["kappa2"], 1.45, 1e-9));
}

#[test]
fn design_from_mirror_ppm() {
    let r = json(&[
        "design",
        "--t1-ppm",
        "60",
        "--t2-ppm",
        "40",
        "--loss-ppm",
        "10",
        "--length-um",
        "335",
    ]);
    assert!(r["transmission"].as_f64().unwrap() > 0.0);
    assert!(close(&r["cavity_length_um"], 335.0, 1e-9));
    // partial mirror sets are rejected by the parser
    assert!(!onr(&["design", "--t1-ppm", "60"]).status.success());
}

#[test]
fn design_text_format() {
    let text = ok_stdout(&["design", "--format", "text"]);
    assert!(text.contains("saturated forward transmission: 0.1812"));
}

#[test]
fn empty_window_is_a_status_not_an_error() {
    let r = json(&["window", "--neff", "0"]);
    assert_eq!(r["status"], "empty window");
    assert!(r["lower_pW"].is_null());
}

#[test]
fn window_reports_edges_and_photons() {
    let r = json(&["window", "--preset", "paper-resonant"]);
    assert_eq!(r["status"], "nonreciprocal window");
    let (l, u) = (
        r["lower_pW"].as_f64().unwrap(),
        r["upper_pW"].as_f64().unwrap(),
    );
    assert!(l < u);
    assert!(r["photons_lower"].as_f64().unwrap() > 0.0);
    let h = json(&[
        "window",
        "--preset",
        "paper-resonant",
        "--convention",
        "hysteretic",
    ]);
    assert!(h["lower_pW"].as_f64().unwrap() < l);
    assert!(h["upper_pW"].as_f64().unwrap() > u);
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [
        &["metrics"][..],
        &["sweep-neff", "--values", "3,12.8"][..],
        &[
            "synth-sweep",
            "--poisson",
            "--seed",
            "11",
            "--powers",
            "10:200:10",
        ][..],
    ] {
        assert_eq!(ok_stdout(args), ok_stdout(args), "{args:?}");
    }
    let a = ok_stdout(&[
        "synth-sweep",
        "--poisson",
        "--seed",
        "11",
        "--powers",
        "10:200:10",
    ]);
    let b = ok_stdout(&[
        "synth-sweep",
        "--poisson",
        "--seed",
        "12",
        "--powers",
        "10:200:10",
    ]);
    assert_ne!(a, b);
}

#[test]
fn poisson_mode_requires_seed() {
    let out = onr(&["synth-sweep", "--poisson"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("--seed"));
}

#[test]
fn metrics_grid_and_columns() {
    let text = ok_stdout(&["metrics", "--powers", "30:110:10pW"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("input_pW,forward_output_pW,backward_output_pW"));
    assert!(lines[3].starts_with("50,"));
}

#[test]
fn sweep_neff_rows_follow_input_order() {
    let text = ok_stdout(&["sweep-neff", "--values", "14.7,3,12.8"]);
    let first: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(first, vec!["14.7", "3", "12.8"]);
}

#[test]
fn scurve_has_both_directions() {
    let text = ok_stdout(&["scurve", "--samples", "50"]);
    assert_eq!(text.lines().count(), 101);
    assert!(text.contains("forward,") && text.contains("backward,"));
    assert!(text.lines().skip(1).any(|l| l.ends_with(",false")));
}

#[test]
fn spectrum_then_fit_recovers_atom_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let p = path.to_str().unwrap();
    ok_stdout(&["spectrum", "--neff", "9.5", "--points", "201", "--out", p]);
    let r = json(&["fit-neff", "--in", p]);
    assert!(close(&r["n_eff_hat"], 9.5, 1e-6), "{}", r["n_eff_hat"]);
}

#[test]
fn synthetic_sweep_ingests_to_a_window() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let p = path.to_str().unwrap();
    let det = "dark=200,eff=0.3,t=0.1";
    ok_stdout(&[
        "synth-sweep",
        "--preset",
        "paper-resonant",
        "--powers",
        "10:1500:10pW",
        "--detector",
        det,
        "--out",
        p,
    ]);
    let r = json(&[
        "ingest",
        "--in",
        p,
        "--detector",
        det,
        "--preset",
        "paper-resonant",
    ]);
    assert_eq!(r["window"]["status"], "window detected");
    let w = json(&["window", "--preset", "paper-resonant"]);
    let (lo, hi) = (
        w["lower_pW"].as_f64().unwrap(),
        w["upper_pW"].as_f64().unwrap(),
    );
    let (l, u) = (
        r["window"]["lower_pW"].as_f64().unwrap(),
        r["window"]["upper_pW"].as_f64().unwrap(),
    );
    assert!(l >= lo && l - lo <= 10.0 + 1e-9, "{l} vs {lo}");
    assert!(u >= hi && u - hi <= 10.0 + 1e-9, "{u} vs {hi}");
}

#[test]
fn malformed_sweep_reports_rows_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "input_power_pW,forward_counts,backward_counts,repeats\n1,2,3,4\n2,x,3,4\n3,1,1\n4,1,1,1\n",
    )
    .unwrap();
    let out = onr(&["ingest", "--in", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ingest");
    let lines: Vec<u64> = err["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["line"].as_u64().unwrap())
        .collect();
    assert_eq!(lines, vec![3, 4]);
}

#[test]
fn quantum_validate_small_scan() {
    let text = ok_stdout(&[
        "quantum-validate",
        "--n-atoms",
        "1",
        "--fock",
        "12",
        "--drive-scan",
        "0.01:1:3pW",
    ]);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[5] == "true"));
}

#[test]
fn dimension_cap_is_an_error() {
    let out = onr(&[
        "quantum-validate",
        "--n-atoms",
        "3",
        "--fock",
        "20",
        "--cap",
        "40",
    ]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "dimension_cap");
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cavity.conf");
    std::fs::write(
        &path,
        "# symmetric test cavity\nkappa1 = 1.85\nkappa2 = 1.45\n",
    )
    .unwrap();
    let r = json(&["design", "--config", path.to_str().unwrap()]);
    assert!(close(&r["transmission"], 0.784, 0.001));
    let r = json(&["design", "--set", "n_eff=3"]);
    assert!(close(&r["n_eff"], 3.0, 0.0));
    let out = onr(&["design", "--set", "bogus=1"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn unknown_preset_fails() {
    assert!(!onr(&["window", "--preset", "nope"]).status.success());
}
