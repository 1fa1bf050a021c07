//! CLI acceptance: determinism of the repro pipeline (criterion 10) and
//! the command-line contract (exit codes, artifact round trips).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn photonstat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photonstat"))
}

fn read_dir_sorted(dir: &Path) -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
}

#[test]
fn criterion_10_repro_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("run_a");
    let out_b = dir.path().join("run_b");
    for out in [&out_a, &out_b] {
        let status = photonstat()
            .args([
                "--quiet",
                "repro",
                "--profile",
                "x0",
                "--duration",
                "60s",
                "--out-dir",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "repro failed in {}", out.display());
    }
    let files_a = read_dir_sorted(&out_a);
    let files_b = read_dir_sorted(&out_b);
    assert_eq!(files_a.len(), files_b.len());
    assert!(files_a.len() >= 5, "expected a full artifact set");
    for (a, b) in files_a.iter().zip(files_b.iter()) {
        assert_eq!(a.file_name(), b.file_name());
        let bytes_a = fs::read(a).unwrap();
        let bytes_b = fs::read(b).unwrap();
        assert_eq!(
            bytes_a,
            bytes_b,
            "artifact {} differs between identical runs",
            a.file_name().unwrap().to_string_lossy()
        );
    }
    println!(
        "criterion 10 determinism: {} artifacts byte-identical across two repro runs  PASS",
        files_a.len()
    );
}

#[test]
fn simulate_is_reproducible_and_g2_sees_no_pairs_without_leak() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    fs::write(
        &model_path,
        r#"{
  "rep_period_ps": 400000,
  "mean_excitons_per_pulse": 0.3,
  "lifetime_bright_ps": 8000.0,
  "lifetime_dim_ps": 2000.0,
  "qy_bright": 0.9,
  "qy_dim": 0.05,
  "biexciton_leak": 0.0,
  "detect_efficiency": 0.05,
  "seed": 3
}"#,
    )
    .unwrap();
    let out_a = dir.path().join("a.psph");
    let out_b = dir.path().join("b.psph");
    for out in [&out_a, &out_b] {
        let status = photonstat()
            .args(["--quiet", "simulate", "--duration", "60s", "--model"])
            .arg(&model_path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());

    let json_out = dir.path().join("g2.json");
    let status = photonstat()
        .args(["--quiet", "g2", "--in"])
        .arg(&out_a)
        .arg("--json")
        .arg(&json_out)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_out).unwrap()).unwrap();
    let g2 = doc["g2"]["g2_zero"].as_f64().unwrap();
    assert!(g2 < 0.02, "leak-free emitter shows g2(0) = {g2}");
    assert_eq!(doc["stage"], "normalized");
}

#[test]
fn convert_round_trips_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("s.tsv");
    fs::write(&tsv, "# rep_period_ps=400000\n# duration_ps=2000000\n0\t100\n1\t250\n0\t900\n")
        .unwrap();
    let psph = dir.path().join("s.psph");
    let back = dir.path().join("back.tsv");
    for (input, output) in [(&tsv, &psph), (&psph, &back)] {
        let status = photonstat()
            .args(["--quiet", "convert", "--in"])
            .arg(input)
            .arg("--out")
            .arg(output)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let text = fs::read_to_string(&back).unwrap();
    assert!(text.contains("0\t100"));
    assert!(text.contains("1\t250"));
    assert!(text.contains("# rep_period_ps=400000"));
}

#[test]
fn spectrum_then_cohort_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    for (i, center) in [(1, 505.0), (2, 509.0), (3, 512.0)] {
        let mut csv = String::from("wavelength_nm,counts\n");
        let sigma = 19.0 / 2.354_820_045;
        for k in 0..240 {
            let wl = 460.0 + 0.4 * k as f64;
            let c = (-((wl - center) / sigma).powi(2) / 2.0f64).exp();
            csv.push_str(&format!("{wl},{c}\n"));
        }
        fs::write(dir.path().join(format!("dot{i:02}.csv")), csv).unwrap();
        let status = photonstat()
            .args(["--quiet", "spectrum", "--csv"])
            .arg(dir.path().join(format!("dot{i:02}.csv")))
            .arg("--json")
            .arg(dir.path().join(format!("dot{i:02}.json")))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let cohort_json = dir.path().join("cohort.json");
    let glob = format!("{}/dot*.json", dir.path().display());
    let status = photonstat()
        .args(["--quiet", "cohort", "--glob", &glob, "--json"])
        .arg(&cohort_json)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cohort_json).unwrap()).unwrap();
    assert_eq!(doc["n"], 3);
    let mean = doc["mean_cew_nm"].as_f64().unwrap();
    assert!((mean - 508.666).abs() < 0.05, "cohort mean {mean}");
}

#[test]
fn satfit_reads_csv_points() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sat.csv");
    let mut text = String::from("power,intensity\n");
    for p in [0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let i = 120.0 * (1.0 - (-p / 1.5f64).exp()) + 3.0 * p / 1.5;
        text.push_str(&format!("{p},{i}\n"));
    }
    fs::write(&csv, text).unwrap();
    let json = dir.path().join("sat.json");
    let status = photonstat()
        .args(["--quiet", "satfit", "--csv"])
        .arg(&csv)
        .arg("--json")
        .arg(&json)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((doc["a"].as_f64().unwrap() - 120.0).abs() < 0.5);
    assert!((doc["p_sat"].as_f64().unwrap() - 1.5).abs() < 0.02);
}

#[test]
fn exit_codes_follow_the_contract() {
    // unknown flag -> usage error 64
    let out = photonstat().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let out = photonstat().args(["g2", "--no-such"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    // help exits 0
    let out = photonstat().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    // missing input file -> validation error 1
    let out = photonstat()
        .args([
            "g2",
            "--in",
            "/nonexistent/stream.psph",
            "--json",
            "/tmp/unused_g2.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // malformed stream -> validation error 1 with a useful message
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.psph");
    fs::write(&bad, b"not a stream").unwrap();
    let out = photonstat()
        .args(["g2", "--in"])
        .arg(&bad)
        .args(["--json", "/tmp/unused_g2.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}
