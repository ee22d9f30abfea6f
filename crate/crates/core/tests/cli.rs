use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lims::cli::{run, EXIT_CONFIG, EXIT_MISSING_INPUT, EXIT_OK};

const CONFIG: &str = r#"{
  "task": "task2",
  "setting": {"sigma": 0.3, "isi": 0.5},
  "classifiers": ["lims", "ppk", "kme", "bklr", "map"],
  "hyperparams": {"lims": [0.05, 0.5]},
  "seed": 17,
  "n_particles": 16,
  "grid": {"names": ["d", "kappa", "a"], "axes": [[0.6, 1.0, 1.4], [1.0, 1.5, 2.0], [-0.1, 0.0, 0.1]]},
  "n_per_class": 10,
  "batch_per_class": 5,
  "train": {"step": 0.1, "iters": 60, "n_init": 2, "init_seed": 0}
}"#;

fn lims(args: &[&str]) -> i32 {
    run(std::iter::once("lims").chain(args.iter().copied()))
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    (dir, cfg, out)
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn pipeline(cfg: &Path, out: &Path, threads: &str) {
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    for cmd in ["generate", "infer", "sweep", "train", "stats", "report"] {
        assert_eq!(lims(&[cmd, "--config", c, "--out", o, "--threads", threads]), EXIT_OK, "{cmd}");
    }
}

#[test]
fn full_pipeline_and_byte_identical_rerun() {
    let (_dir, cfg, out) = setup(CONFIG);
    pipeline(&cfg, &out, "1");

    for f in [
        "dataset/dataset.json",
        "dataset/manifest.json",
        "posteriors/posteriors.json",
        "posteriors/manifest.json",
        "posteriors/train/train_0000.csv",
        "posteriors/test/test_0019.csv",
        "results.csv",
        "selection.csv",
        "signrank.csv",
        "summary.csv",
        "models/lims.json",
        "models/ppk.json",
        "models/bklr.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    let mut rdr = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["task", "setting_sigma", "setting_isi", "classifier", "hyperparam", "run", "accuracy", "entropy"]);
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        *counts.entry((rec[3].to_string(), rec[4].to_string())).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    assert!(counts.values().all(|&n| n == 10), "{counts:?}");

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest_sweep.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 17);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    assert!(manifest["version"].is_string());

    let before = snapshot(&out);
    pipeline(&cfg, &out, "1");
    assert_eq!(snapshot(&out), before);
}

#[test]
fn thread_count_does_not_change_results() {
    let (_dir, cfg, out) = setup(CONFIG);
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    for cmd in ["generate", "infer", "sweep"] {
        assert_eq!(lims(&[cmd, "--config", c, "--out", o, "--threads", "1"]), EXIT_OK);
    }
    let one = fs::read(out.join("results.csv")).unwrap();
    let other = out.with_file_name("out3");
    fs::create_dir_all(&other).unwrap();
    for cmd in ["generate", "infer", "sweep"] {
        assert_eq!(lims(&[cmd, "--config", c, "--out", other.to_str().unwrap(), "--threads", "3"]), EXIT_OK);
    }
    assert_eq!(fs::read(other.join("results.csv")).unwrap(), one);
}

#[test]
fn invalid_task_is_a_config_error_and_writes_nothing() {
    let (_dir, cfg, out) = setup(&CONFIG.replace("\"task2\"", "\"task7\""));
    for cmd in ["generate", "infer", "sweep"] {
        assert_eq!(lims(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_CONFIG);
        assert!(!out.exists());
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let (_dir, cfg, out) = setup(&CONFIG.replace("\"seed\": 17", "\"seed\": 17, \"sed\": 3"));
    assert_eq!(lims(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_CONFIG);
    assert!(!out.exists());
}

#[test]
fn bad_arguments_are_config_errors() {
    assert_eq!(lims(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(lims(&["generate", "--threads", "zero"]), EXIT_CONFIG);
    let (_dir, cfg, out) = setup(CONFIG);
    assert_eq!(lims(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "0"]), EXIT_CONFIG);
    assert_eq!(lims(&["generate", "--config", "/nonexistent/run.json"]), EXIT_CONFIG);
}

#[test]
fn downstream_command_without_inputs() {
    let (_dir, cfg, out) = setup(CONFIG);
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(lims(&["infer", "--config", c, "--out", o]), EXIT_MISSING_INPUT);
    assert_eq!(lims(&["stats", "--config", c, "--out", o]), EXIT_MISSING_INPUT);
    assert_eq!(lims(&["report", "--config", c, "--out", o]), EXIT_MISSING_INPUT);
}

#[test]
fn seed_flag_overrides_file_and_conflicts_are_caught() {
    let (_dir, cfg, out) = setup(CONFIG);
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(lims(&["generate", "--config", c, "--out", o, "--seed", "5"]), EXIT_OK);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("dataset/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    // posteriors for a dataset generated under another seed
    assert_eq!(lims(&["infer", "--config", c, "--out", o]), EXIT_CONFIG);
    assert!(!out.join("posteriors").exists());
    assert_eq!(lims(&["infer", "--config", c, "--out", o, "--seed", "5"]), EXIT_OK);
}
