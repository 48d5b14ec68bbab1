use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn entverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entverify"))
        .args(args)
        .env_remove("ENTVERIFY_WORKERS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad report ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn strong_fixture_is_detected() {
    let path = fixture("phi_linear_60000.json");
    let out = entverify(&["verify", path.to_str().unwrap(), "--method", "gamma-alpha", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["region"], "detected_set");
    let c = r["confidence"].as_f64().unwrap();
    assert!(c > 500.0, "{c}");
    let lhs = r["log10_eps2_bound"].as_f64().unwrap() + r["log10_c_nd"].as_f64().unwrap();
    assert!(lhs <= -c);
}

#[test]
fn small_fixture_is_inconclusive() {
    let path = fixture("phi_linear_1500.json");
    let out = entverify(&["verify", path.to_str().unwrap(), "--method", "gamma-alpha", "--workers", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["region"], "full_state_space");
    assert_eq!(r["confidence"].as_f64(), Some(0.0));
}

#[test]
fn nonlinear_fixture_with_annealing() {
    let path = fixture("phi_nonlinear_60000.json");
    let out = entverify(&[
        "verify",
        path.to_str().unwrap(),
        "--sa-steps",
        "4000",
        "--sa-repeats",
        "3",
        "--mc-samples",
        "20000",
        "--workers",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["method"], "gamma_w");
    assert!(r["confidence"].as_f64().unwrap() > 100.0);
}

#[test]
fn gamma_alpha_rejects_nonlinear_witness() {
    let path = fixture("phi_nonlinear_60000.json");
    let out = entverify(&["verify", path.to_str().unwrap(), "--method", "gamma-alpha"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["region"], "full_state_space");
    assert!(r["diagnostic"].as_str().unwrap().contains("linear witness"));
}

#[test]
fn fixed_epsilon_check() {
    let path = fixture("phi_linear_60000.json");
    let path = path.to_str().unwrap();
    let pass = entverify(&["verify", path, "--method", "gamma-alpha", "--epsilon-log10", "-100", "--workers", "1"]);
    assert_eq!(pass.status.code(), Some(0));
    assert_eq!(report(&pass)["confidence"].as_f64(), Some(100.0));
    let fail = entverify(&["verify", path, "--method", "gamma-alpha", "--epsilon-log10", "-5000", "--workers", "1"]);
    assert_eq!(fail.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let path = fixture("phi_linear_60000.json");
    let args = ["verify", path.to_str().unwrap(), "--method", "gamma-alpha", "--workers", "3", "--seed", "5"];
    let a = entverify(&args);
    let b = entverify(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_entry_names_its_path() {
    let text = std::fs::read_to_string(fixture("phi_linear_1500.json")).unwrap();
    let broken = text.replacen("[0.2500000000000001, 0.0]", "[0.25, \"zero\"]", 1);
    assert_ne!(text, broken);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, broken).unwrap();
    let out = entverify(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/settings/0/outcomes/0/effect/0/0/1"), "{err}");
    assert!(err.contains("line 10"), "{err}");
}

#[test]
fn incomplete_povm_is_rejected() {
    let text = std::fs::read_to_string(fixture("phi_linear_1500.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["settings"][2]["outcomes"].as_array_mut().unwrap().pop();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("incomplete.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = entverify(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/settings/2") && err.contains("incomplete"), "{err}");
}

fn simulate(args: &[&str]) -> Value {
    let mut full = vec!["simulate"];
    full.extend_from_slice(args);
    let out = entverify(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    report(&out)
}

fn counts(file: &Value, setting: usize) -> Vec<u64> {
    file["settings"][setting]["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["count"].as_u64().unwrap())
        .collect()
}

#[test]
fn simulated_phi_plus_concentrates_on_even_parity() {
    let file = simulate(&["--state", "phi-plus", "--settings", "zz", "--shots", "1000", "--seed", "3"]);
    let c = counts(&file, 0);
    assert_eq!(c.iter().sum::<u64>(), 1000);
    assert_eq!(c[1] + c[2], 0);
    assert!((c[0] as f64 - 500.0).abs() < 80.0);
}

#[test]
fn simulated_mixed_state_is_uniform() {
    let file = simulate(&["--state", "mixed", "--settings", "xz", "--shots", "4000", "--seed", "8"]);
    let c = counts(&file, 0);
    let chi2: f64 = c.iter().map(|&k| (k as f64 - 1000.0).powi(2) / 1000.0).sum();
    // 1% critical value of χ² with 3 degrees of freedom.
    assert!(chi2 < 11.345, "{chi2}");
}

#[test]
fn simulation_is_deterministic_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = entverify(&[
            "simulate", "--state", "phi", "--phase", "1.5", "--noise", "0.1", "--shots", "900", "--seed", "4", "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let file = entverify_cli::format::parse(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(file.validate().unwrap().data.total_counts(), 900);
}

#[test]
fn volume_matches_ball_formula() {
    let out = entverify(&["volume", "--dim", "2", "--mc-samples", "200000", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    let exact = std::f64::consts::PI * 2f64.sqrt() / 3.0;
    assert!((v["closed_form"].as_f64().unwrap() - exact).abs() < 1e-12);
    assert!(v["relative_deviation"].as_f64().unwrap().abs() < 0.01);
    let bare = report(&entverify(&["volume", "--dim", "3"]));
    assert!(bare.get("monte_carlo").is_none());
}

#[test]
fn contour_marks_the_run_threshold() {
    let out = entverify(&["contour", "--dim", "4", "--n-min", "150", "--n-max", "400", "--c-min", "5", "--c-max", "15", "--c-step", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<(u64, f64, f64, bool)> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3 * 251);
    for &(n, c, delta, trivial) in &rows {
        assert_eq!(delta, entverify::regions::delta_log10(n, 4, -c).unwrap());
        assert_eq!(trivial, delta >= 1.0);
    }
    let first = rows.iter().find(|r| r.1 == 10.0 && !r.3).unwrap();
    assert!((207..=209).contains(&first.0), "{}", first.0);
    for c in [5.0, 10.0, 15.0] {
        let column: Vec<f64> = rows.iter().filter(|r| r.1 == c).map(|r| r.2).collect();
        assert!(column.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn empty_contour_range_is_an_error() {
    let out = entverify(&["contour", "--dim", "4", "--n-min", "10", "--n-max", "5", "--c-min", "1", "--c-max", "2"]);
    assert_eq!(out.status.code(), Some(1));
}
