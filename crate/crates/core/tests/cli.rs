//! End-to-end behaviour of the `chemobound` binary: exit codes and outputs.

use std::path::Path;
use std::process::{Command, Output};

fn chemobound(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemobound"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CHEMOBOUND_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

#[test]
fn check_params_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = chemobound(&["check-params", "-n", "3", "--corollary", "2"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["report"]["admissible"], true);

    let bad = chemobound(
        &["check-params", "-n", "3", "--p", "2", "--q", "3", "--s1", "3", "--s2", "1.5"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
    let failed: Vec<_> = json(&bad)["report"]["clauses"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["clause"].as_str().unwrap().to_owned())
        .collect();
    assert!(failed.contains(&"n < q".to_owned()), "{failed:?}");

    let cfg = dir.path().join("broken.toml");
    std::fs::write(&cfg, "seed = [\n").unwrap();
    let malformed = chemobound(&["check-params", "-c", cfg.to_str().unwrap()], dir.path());
    assert_eq!(malformed.status.code(), Some(2));

    std::fs::write(&cfg, "[model]\nkappa = 1.0\n").unwrap();
    let unknown = chemobound(&["check-params", "-c", cfg.to_str().unwrap()], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn corollary_two_bound_reports_its_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemobound(&["bound", "--corollary", "2", "-n", "3", "--e0", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    for (eta, k) in v["indices"]["eta"].as_array().unwrap().iter().zip(v["indices"]["k_eta"].as_array().unwrap()) {
        assert!((eta.as_f64().unwrap() - 1.5).abs() < 1e-12);
        assert!((k.as_f64().unwrap() - 3.0).abs() < 1e-12);
    }
    let t = v["t_lower"].as_f64().unwrap();
    assert!(t > 0.0 && t.is_finite());
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);

    let missing = chemobound(&["bound", "--corollary", "2", "-n", "3"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn optimized_bound_is_no_worse_than_corollary_one() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["-n", "3", "--p", "3", "--e0", "1", "--c-gn", "1.5"];
    let cor = chemobound(&[&["bound", "--corollary", "1"][..], &common].concat(), dir.path());
    let opt = chemobound(&[&["optimize-bound", "--q", "6"][..], &common].concat(), dir.path());
    assert_eq!(cor.status.code(), Some(0), "{}", String::from_utf8_lossy(&cor.stderr));
    assert_eq!(opt.status.code(), Some(0), "{}", String::from_utf8_lossy(&opt.stderr));
    let (tc, to) = (json(&cor)["t_lower"].as_f64().unwrap(), json(&opt)["t_lower"].as_f64().unwrap());
    assert!(to >= tc * (1.0 - 1e-9), "optimized {to} < corollary {tc}");
}

#[test]
fn region_table_in_three_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemobound(&["region", "-n", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "p,q_low,q_high");
    let row = lines.find(|l| l.starts_with("2,")).expect("row for p = 2");
    assert_eq!(row.split(',').nth(2), Some("6"));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        r#"
seed = 3

[model]
xi = 0.1

[indices]
corollary = 2

[grid]
cells = 60

[profile]
kind = "gaussian_bump"
amplitude = 30.0
width = 0.2

[solver]
t_end = 0.002
sample_stride = 5

[sweep]
jobs = 2

[sweep.axes]
"model.chi" = [5.0, 10.0, 20.0]
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = chemobound(
        &["sweep", "-c", cfg.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = out_dir.join("summary.csv");
    for i in 0..3 {
        assert!(out_dir.join(format!("run_{i:04}")).join("trajectory.csv").is_file());
    }
    let text = std::fs::read_to_string(summary).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    let header = lines.next().unwrap();
    assert!(header.contains("t_lower"), "{header}");
    assert_eq!(lines.count(), 3);
}
