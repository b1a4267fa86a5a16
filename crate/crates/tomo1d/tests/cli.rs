//! End-to-end checks of the `tomo1d` binary: exit codes, output files, and
//! byte-for-byte reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tomo1d"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tomo1d_bin_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

#[test]
fn identifiability_fixture_a_equals_one() {
    let dir = workdir("ident_ok");
    write(&dir.join("a.csv"), "1,1,0\n1,0,1\n");
    write(&dir.join("b.csv"), "1,0\n0,1\n1,1\n");
    let out = bin()
        .args([
            "identifiability",
            "--matrix",
            dir.join("a.csv").to_str().unwrap(),
            "--projections",
            dir.join("b.csv").to_str().unwrap(),
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/identifiability.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["identifiable_all"], true);
    assert!(dir.join("out/run_manifest.json").exists());
}

#[test]
fn identifiability_fixture_a_equals_minus_one() {
    let dir = workdir("ident_odd");
    write(&dir.join("a.csv"), "1,1,0\n1,0,1\n");
    write(&dir.join("b.csv"), "1,0\n0,1\n1,-1\n");
    let out = bin()
        .args([
            "identifiability",
            "--matrix",
            dir.join("a.csv").to_str().unwrap(),
            "--projections",
            dir.join("b.csv").to_str().unwrap(),
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/identifiability.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["identifiable_all"], false);
    assert_eq!(report["identifiable_even"], true);
    assert_eq!(report["first_failing_order"], 3);
}

#[test]
fn missing_file_exits_with_code_two() {
    let dir = workdir("missing");
    let out = bin()
        .args([
            "identifiability",
            "--matrix",
            dir.join("nope.csv").to_str().unwrap(),
            "--projections",
            dir.join("also_nope.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_config_key_exits_nonzero_naming_it() {
    let dir = workdir("badkey");
    write(&dir.join("bad.cfg"), "seed = 1\nmystery_knob = 2\n");
    let out = bin()
        .args([
            "asymptotic",
            "--config",
            dir.join("bad.cfg").to_str().unwrap(),
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mystery_knob"), "{stderr}");
}

#[test]
fn asymptotic_small_run_has_expected_shape() {
    let dir = workdir("asym");
    write(
        &dir.join("fig4.cfg"),
        "seed = 5\nn_in = 4\nn_out = 4\nk_list = 32\nn_replicates = 8\n",
    );
    let out = bin()
        .args([
            "asymptotic",
            "--config",
            dir.join("fig4.cfg").to_str().unwrap(),
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out/asymptotic_stds.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,theta,optimal_1d,two_d,rand_k32");
    assert_eq!(lines.len(), 17); // header + 16 parameters
}

#[test]
fn traffic_outputs_are_reproducible_bytes() {
    let dir = workdir("traffic");
    write(
        &dir.join("fig5.cfg"),
        "seed = 9\nn_in = 2\nn_out = 2\nn_samples = 300\nn_runs = 3\nestimators = moment,mle\n",
    );
    for (out_dir, threads) in [("out1", "1"), ("out2", "3")] {
        let out = bin()
            .args([
                "traffic",
                "--config",
                dir.join("fig5.cfg").to_str().unwrap(),
                "--out-dir",
                dir.join(out_dir).to_str().unwrap(),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let b1 = std::fs::read(dir.join("out1/traffic_median_log_errors.csv")).unwrap();
    let b2 = std::fs::read(dir.join("out2/traffic_median_log_errors.csv")).unwrap();
    assert_eq!(b1, b2);
    let text = String::from_utf8(b1).unwrap();
    assert!(text.starts_with("param,mean_truth,moment,mle\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn seed_override_changes_outputs() {
    let dir = workdir("seedflip");
    write(
        &dir.join("cfg.cfg"),
        "seed = 9\nn_in = 2\nn_out = 2\nn_samples = 200\nn_runs = 2\nestimators = moment\n",
    );
    for (out_dir, seed) in [("outA", None), ("outB", Some("10"))] {
        let mut cmd = bin();
        cmd.args([
            "traffic",
            "--config",
            dir.join("cfg.cfg").to_str().unwrap(),
            "--out-dir",
            dir.join(out_dir).to_str().unwrap(),
        ]);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
    }
    let a = std::fs::read(dir.join("outA/traffic_median_log_errors.csv")).unwrap();
    let b = std::fs::read(dir.join("outB/traffic_median_log_errors.csv")).unwrap();
    assert_ne!(a, b);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("outB/run_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 10);
}

#[test]
fn delay_emit_cdf_writes_per_link_curves() {
    let dir = workdir("delay");
    write(
        &dir.join("fig7.cfg"),
        "seed = 3\ntree = two_leaf\nn_samples = 300\nn_runs = 1\nn_bins = 3\nn_nodes = 24\nmodes = one_d_cor\n",
    );
    let out = bin()
        .args([
            "delay",
            "--config",
            dir.join("fig7.cfg").to_str().unwrap(),
            "--out-dir",
            dir.join("out").to_str().unwrap(),
            "--emit-cdf",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out/delay_median_mallows.csv")).unwrap();
    assert!(csv.starts_with("link,u,v,one_d_cor\n"));
    for link in 1..=3 {
        assert!(dir.join(format!("out/cdf_link{link}_true.csv")).exists());
        assert!(dir.join(format!("out/cdf_link{link}_one_d_cor.csv")).exists());
    }
    // Manifest lists exactly the files that exist.
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/run_manifest.json")).unwrap(),
    )
    .unwrap();
    for entry in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(entry.as_str().unwrap()).exists());
    }
}
