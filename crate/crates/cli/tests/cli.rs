use std::fs;
use std::path::Path;
use std::process::Command;

use ictlab_cli::commands;
use ictlab_cli::config::parse_config_str;
use ictlab_cli::output::{self, read_boundary_csv, read_metrics, read_nonlin};
use ictlab_cli::ExperimentConfig;
use ictlab_core::checkpoint;
use ictlab_core::{Matrix, Method};
use rand::{Rng, SeedableRng};

const SMALL: &str = r#"{
  "method": "ict3",
  "total_steps": 30,
  "batch_size": 32,
  "hidden": [16, 16],
  "n_points": 300,
  "n_test": 60,
  "probe_pairs": 20,
  "log_every": 10,
  "resolution": 12,
  "seeds": [0, 1]
}"#;

fn small() -> ExperimentConfig {
    parse_config_str(SMALL, Path::new("small.json")).unwrap()
}

fn run_files(dir: &Path) -> Vec<&'static str> {
    [
        output::METRICS_FILE,
        output::NONLIN_FILE,
        output::LIPSCHITZ_FILE,
        output::BOUNDARY_CSV_FILE,
        output::BOUNDARY_PGM_FILE,
        output::CHECKPOINT_FILE,
    ]
    .into_iter()
    .filter(|f| !dir.join(f).exists())
    .collect()
}

#[test]
fn train_writes_every_artifact() {
    let out = tempfile::tempdir().unwrap();
    let table = commands::train(&small(), out.path(), 2).unwrap();
    assert_eq!(table.cells.len(), 1);
    assert_eq!(table.cells[0].accuracies.len(), 2);
    for seed in [0, 1] {
        let dir = out.path().join(format!("seed_{seed}"));
        assert!(run_files(&dir).is_empty(), "missing {:?}", run_files(&dir));
        let metrics = read_metrics(&dir.join(output::METRICS_FILE)).unwrap();
        assert_eq!(
            metrics.iter().map(|m| m.step).collect::<Vec<_>>(),
            vec![10, 20, 30]
        );
        let boundary = read_boundary_csv(&dir.join(output::BOUNDARY_CSV_FILE)).unwrap();
        assert_eq!(boundary.len(), 144);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join(output::MANIFEST_FILE)).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 13);
    for f in files {
        assert!(out.path().join(f.as_str().unwrap()).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join(output::SUMMARY_FILE)).unwrap())
            .unwrap();
    assert_eq!(summary["rows"][0]["method"], "ict3");
    assert!(summary["rows"][0]["mean"].is_f64());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    commands::train(&small(), a.path(), 1).unwrap();
    commands::train(&small(), b.path(), 2).unwrap();
    for f in [
        "seed_0/metrics.csv",
        "seed_1/nonlin.csv",
        "seed_1/boundary.csv",
        "seed_0/boundary.pgm",
        "seed_0/lipschitz.json",
        "seed_1/net.bin",
        "summary.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn zero_step_run_keeps_headers_and_null_accuracy() {
    let mut cfg = small();
    cfg.train.total_steps = 0;
    cfg.seeds = vec![3];
    let out = tempfile::tempdir().unwrap();
    commands::train(&cfg, out.path(), 1).unwrap();
    let metrics = fs::read_to_string(out.path().join("seed_3/metrics.csv")).unwrap();
    assert_eq!(metrics, "step,w_t,sup_loss,unsup_loss,test_acc\n");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join(output::SUMMARY_FILE)).unwrap())
            .unwrap();
    assert!(summary["rows"][0]["mean"].is_null());
}

#[test]
fn probe_and_boundary_reproduce_the_run() {
    let mut cfg = small();
    cfg.seeds = vec![1];
    cfg.train.seed = 1;
    let out = tempfile::tempdir().unwrap();
    commands::train(&cfg, out.path(), 1).unwrap();
    let run = out.path().join("seed_1");
    let ckpt = run.join(output::CHECKPOINT_FILE);

    let probe_dir = out.path().join("probe");
    let report = commands::probe(&ckpt, &cfg.train, &probe_dir).unwrap();
    let trained = read_nonlin(&run.join(output::NONLIN_FILE)).unwrap();
    let last: Vec<_> = trained.iter().filter(|r| r.step == 30).collect();
    assert_eq!(last.len(), report.nonlin.len());
    for (a, b) in last.iter().zip(&report.nonlin) {
        assert_eq!((a.layer, a.score), (b.layer, b.score));
    }
    assert_eq!(
        fs::read(run.join(output::LIPSCHITZ_FILE)).unwrap(),
        fs::read(probe_dir.join(output::LIPSCHITZ_FILE)).unwrap()
    );

    let bdir = out.path().join("boundary");
    let raster = commands::boundary(&ckpt, &cfg.train, 12, &bdir).unwrap();
    assert_eq!(
        fs::read(run.join(output::BOUNDARY_CSV_FILE)).unwrap(),
        fs::read(bdir.join(output::BOUNDARY_CSV_FILE)).unwrap()
    );

    // spot-check cells against a direct forward pass at the cell center
    let net = checkpoint::load(&ckpt).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let n = raster.resolution;
    for _ in 0..100 {
        let (r, c) = (rng.random_range(0..n), rng.random_range(0..n));
        let x = raster.x_min + (raster.x_max - raster.x_min) * (c as f64 + 0.5) / n as f64;
        let y = raster.y_min + (raster.y_max - raster.y_min) * (r as f64 + 0.5) / n as f64;
        let pred = net.predict(&Matrix::from_rows(&[[x, y]]).unwrap()).unwrap()[0];
        assert_eq!(raster.get(r, c), pred);
    }
}

#[test]
fn checkpoint_forward_is_bit_identical() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.seeds = vec![0];
    commands::train(&cfg, out.path(), 1).unwrap();
    let path = out.path().join("seed_0").join(output::CHECKPOINT_FILE);
    let net = checkpoint::load(&path).unwrap();
    let copy = out.path().join("copy.bin");
    checkpoint::save(&net, &copy).unwrap();
    let again = checkpoint::load(&copy).unwrap();
    let batch = Matrix::from_rows(&[[0.1, -0.3], [1.5, 0.2], [-1.0, 0.9]]).unwrap();
    let (a, b) = (net.logits(&batch).unwrap(), again.logits(&batch).unwrap());
    assert!(a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn sweep_has_one_row_per_cell() {
    let mut cfg = small();
    cfg.seeds = vec![0];
    cfg.train.total_steps = 5;
    cfg.sweep_labels = vec![2, 4];
    cfg.sweep_methods = vec![(Method::Erm, 1), (Method::Ict, 2)];
    let out = tempfile::tempdir().unwrap();
    commands::sweep(&cfg, out.path(), 2).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join(output::SUMMARY_FILE)).unwrap())
            .unwrap();
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(out.path().join("ict2_n4/seed_0/metrics.csv").exists());
}

#[test]
fn binary_runs_train_and_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.json");
    fs::write(&cfg_path, SMALL).unwrap();
    let out = dir.path().join("runs/a");
    let bin = env!("CARGO_BIN_EXE_ictlab");
    let status = Command::new(bin)
        .args(["train", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "4", "--steps", "8", "--out"])
        .arg(&out)
        .env("ICT_LAB_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(output::MANIFEST_FILE)).unwrap())
            .unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([4]));
    assert_eq!(manifest["config"]["train"]["total_steps"], 8);

    let bout = dir.path().join("b");
    let status = Command::new(bin)
        .args(["boundary", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "4", "--resolution", "40", "--checkpoint"])
        .arg(out.join("seed_4/net.bin"))
        .arg("--out")
        .arg(&bout)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        read_boundary_csv(&bout.join(output::BOUNDARY_CSV_FILE))
            .unwrap()
            .len(),
        1600
    );

    let bad = Command::new(bin)
        .args(["train", "--config"])
        .arg(&cfg_path)
        .args(["--out", "/proc/forbidden/x"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn bad_configs_fail_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("typo.json");
    fs::write(&cfg_path, "{\n  \"aplha\": 0.3\n}\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ictlab"))
        .args(["train", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains(":2: unknown key \"aplha\" (did you mean \"alpha\"?)"),
        "{err}"
    );
}
