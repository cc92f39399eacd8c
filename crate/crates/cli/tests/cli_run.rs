//! End-to-end checks of the `tabncd` binary: artifact layout, byte-level
//! reproducibility, embedding export shape, and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabncd"))
}

/// Two interleaved half-moon-ish blobs per class, three classes.
fn write_fixture(dir: &Path) {
    let mut csv = String::from("f0,f1,f2,label\n");
    let mut state = 88172645463325252u64;
    let mut rnd = move || {
        // xorshift, good enough for a fixture
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % 1000) as f64 / 1000.0 - 0.5
    };
    for (label, cx, cy) in [("a", 0.0, 0.0), ("b", 5.0, 5.0), ("c", -5.0, 5.0)] {
        for _ in 0..120 {
            csv.push_str(&format!(
                "{:.4},{:.4},{:.4},{label}\n",
                cx + rnd(),
                cy + rnd(),
                cx - cy + rnd()
            ));
        }
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
    fs::write(
        dir.join("manifest.json"),
        r#"{
  "name": "cli-fixture",
  "data": "data.csv",
  "label_column": "label",
  "known_classes": ["a"],
  "unknown_classes": ["b", "c"],
  "train_fraction": 0.7,
  "split_seed": 1
}"#,
    )
    .unwrap();
    fs::write(
        dir.join("config.json"),
        r#"{
  "seed": 5,
  "hidden": 12,
  "latent": 6,
  "ssl_epochs": 5,
  "epochs": 5,
  "batch_size": 64,
  "top_k": 10,
  "checkpoint_every_epoch": true
}"#,
    )
    .unwrap();
}

#[test]
fn run_produces_all_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let manifest = dir.path().join("manifest.json");
    let config = dir.path().join("config.json");

    for out in ["out1", "out2"] {
        let status = bin()
            .args(["run", "--manifest"])
            .arg(&manifest)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }

    for artifact in [
        "config.json",
        "split_summary.json",
        "encoder.tncd",
        "pretrain_log.json",
        "model.tncd",
        "train_log.json",
        "metrics.json",
        "embeddings.csv",
        "checkpoints/epoch_0004.tncd",
    ] {
        assert!(
            dir.path().join("out1").join(artifact).exists(),
            "missing artifact {artifact}"
        );
    }

    let a = fs::read(dir.path().join("out1/metrics.json")).unwrap();
    let b = fs::read(dir.path().join("out2/metrics.json")).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical metrics.json");

    let metrics: serde_json::Value =
        serde_json::from_slice(&a).expect("metrics.json parses");
    for method in ["tabularncd", "kmeans", "baseline"] {
        assert!(metrics.get(method).is_some(), "metrics.json lacks {method}");
        for key in ["acc", "bacc", "nmi", "ari", "assignment", "n", "per_class_recall"] {
            assert!(
                metrics[method].get(key).is_some(),
                "{method} report lacks {key}"
            );
        }
    }

    // embeddings: one row per sample, id/split/class + latent dims
    let emb = fs::read_to_string(dir.path().join("out1/embeddings.csv")).unwrap();
    let mut lines = emb.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 3 + 6);
    assert_eq!(lines.count(), 360);
}

#[test]
fn eval_and_export_work_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let manifest = dir.path().join("manifest.json");
    let config = dir.path().join("config.json");
    let out = dir.path().join("out");
    assert!(bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());

    assert!(bin()
        .args(["eval", "--manifest"])
        .arg(&manifest)
        .arg("--checkpoint")
        .arg(out.join("model.tncd"))
        .arg("--out")
        .arg(dir.path().join("eval"))
        .status()
        .unwrap()
        .success());
    assert!(dir.path().join("eval/metrics_tabularncd.json").exists());

    assert!(bin()
        .args(["export-embeddings", "--manifest"])
        .arg(&manifest)
        .arg("--checkpoint")
        .arg(out.join("encoder.tncd"))
        .arg("--out-csv")
        .arg(dir.path().join("emb.csv"))
        .status()
        .unwrap()
        .success());
    assert!(dir.path().join("emb.csv").exists());
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    // missing manifest file
    let status = bin()
        .args(["run", "--manifest"])
        .arg(dir.path().join("nope.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // invalid weight in config
    fs::write(dir.path().join("bad.json"), r#"{"w1": 3.0}"#).unwrap();
    let status = bin()
        .args(["run", "--manifest"])
        .arg(dir.path().join("manifest.json"))
        .arg("--config")
        .arg(dir.path().join("bad.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    // a label the manifest does not declare
    let mut csv = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    csv.push_str("0.1,0.2,0.3,zz\n0.2,0.3,0.4,zz\n");
    fs::write(dir.path().join("data.csv"), csv).unwrap();
    let status = bin()
        .args(["run", "--manifest"])
        .arg(dir.path().join("manifest.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}
