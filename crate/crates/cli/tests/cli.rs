//! End-to-end tests driving the built binary: synthetic data generation,
//! feature extraction, training, prediction, and the flat-config override.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ledgertopo"))
}

fn run(args: &[&str], dir: &Path) -> String {
    let output = binary()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed:\n{}{}",
        args,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn synth(dir: &Path, out: &str, weeks: usize, seed: u64) -> PathBuf {
    run(
        &[
            "synth",
            "--seed",
            &seed.to_string(),
            "--weeks",
            &weeks.to_string(),
            "--out",
            out,
        ],
        dir,
    );
    dir.join(out)
}

fn features_all(dir: &Path, data: &Path, out: &str) -> PathBuf {
    let data = data.to_str().unwrap();
    run(
        &[
            "features",
            "all",
            "--tx",
            &format!("{data}/transactions.csv"),
            "--price",
            &format!("{data}/price.csv"),
            "--issuance",
            &format!("{data}/issuance.csv"),
            "--trends",
            &format!("{data}/trends.csv"),
            "--out",
            out,
        ],
        dir,
    );
    dir.join(out)
}

#[test]
fn synth_is_reproducible_and_features_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let a = synth(dir, "a", 30, 11);
    let b = synth(dir, "b", 30, 11);
    for file in [
        "transactions.csv",
        "price.csv",
        "issuance.csv",
        "trends.csv",
    ] {
        let left = std::fs::read(a.join(file)).unwrap();
        let right = std::fs::read(b.join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical seeds");
    }

    let f1 = features_all(dir, &a, "features1.csv");
    let f2 = features_all(dir, &b, "features2.csv");
    assert_eq!(
        std::fs::read(&f1).unwrap(),
        std::fs::read(&f2).unwrap(),
        "feature matrices differ"
    );
}

#[test]
fn ingest_writes_window_files_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = synth(dir, "data", 8, 3);
    run(
        &[
            "ingest",
            "--tx",
            data.join("transactions.csv").to_str().unwrap(),
            "--out",
            "windows",
        ],
        dir,
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("windows/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["weeks"], 8);
    for week in 0..8 {
        assert!(dir.join(format!("windows/week_{week:04}.csv")).exists());
    }
}

#[test]
fn train_predict_and_report_produce_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = synth(dir, "data", 60, 7);
    let features = features_all(dir, &data, "features.csv");

    std::fs::write(
        dir.join("fast.conf"),
        "hidden = 6\nwindow = 4\nepochs = 25\npatience = 6\nseed = 3\n",
    )
    .unwrap();

    run(
        &[
            "train",
            "--config",
            "fast.conf",
            "--features",
            features.to_str().unwrap(),
            "--out",
            "model.bin",
        ],
        dir,
    );
    assert!(dir.join("model.bin").exists());

    run(
        &[
            "predict",
            "--config",
            "fast.conf",
            "--features",
            features.to_str().unwrap(),
            "--model",
            "model.bin",
            "--out",
            "predictions.csv",
        ],
        dir,
    );
    let predictions = std::fs::read_to_string(dir.join("predictions.csv")).unwrap();
    assert!(predictions.starts_with("week,actual,predicted\n"));
    assert!(predictions.lines().count() > 1);

    run(
        &[
            "report",
            "--features",
            features.to_str().unwrap(),
            "--out-dir",
            "report",
        ],
        dir,
    );
    let correlations = std::fs::read_to_string(dir.join("report/correlations.csv")).unwrap();
    assert!(correlations.contains("delta_beta0"));
    let summary = std::fs::read_to_string(dir.join("report/summary.txt")).unwrap();
    assert!(summary.contains("Pairwise correlations"));
}

#[test]
fn config_keys_reach_the_model_and_bad_keys_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.conf"), "nonsense_key = 1\n").unwrap();
    let data = synth(dir, "data", 30, 5);
    let features = features_all(dir, &data, "features.csv");
    let output = binary()
        .args([
            "train",
            "--config",
            "bad.conf",
            "--features",
            features.to_str().unwrap(),
            "--out",
            "model.bin",
        ])
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("nonsense_key"));
}

#[test]
fn topo_and_motif_tables_need_only_transactions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = synth(dir, "data", 6, 9);
    run(
        &[
            "features",
            "topo",
            "--tx",
            data.join("transactions.csv").to_str().unwrap(),
            "--out",
            "topo.csv",
        ],
        dir,
    );
    let topo = std::fs::read_to_string(dir.join("topo.csv")).unwrap();
    assert!(topo.starts_with("week,p,beta_e10"));
    // Two rows (p = 0 and p = 1) per week plus the header.
    assert_eq!(topo.lines().count(), 1 + 2 * 6);

    run(
        &[
            "features",
            "motifs",
            "--tx",
            data.join("transactions.csv").to_str().unwrap(),
            "--out",
            "motifs.csv",
        ],
        dir,
    );
    let motifs = std::fs::read_to_string(dir.join("motifs.csv")).unwrap();
    assert_eq!(motifs.lines().count(), 1 + 6);
}
