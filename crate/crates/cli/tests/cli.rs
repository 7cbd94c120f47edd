//! End-to-end runs of the `featspace` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use featspace::data::DATASET_ENV;
use featspace::optim::{total_iterations, DecayPolicy, MetricsLog};
use featspace_cli::runfile::RunFile;

fn featspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featspace"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove(DATASET_ENV)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_runfile(dir: &Path, policy: &str, epochs: usize) -> String {
    let path = dir.join(format!("{policy}.toml"));
    let text = format!(
        "design = \"design1\"\nscale = \"tiny\"\nsynthetic = true\ntrain_images = 64\ntest_images = 32\n\
         output = \"out-{policy}\"\n[train]\nepochs = {epochs}\nbatch_size = 16\n[train.policy]\n{}",
        match policy {
            "fixed" => "kind = \"fixed\"\nc = 0.02\n",
            _ => "kind = \"poly\"\nlambda0 = 0.05\nc = 1.0\n",
        }
    );
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn analyze_design1_table() {
    let o = featspace(&["analyze", "design1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(20173K)"), "{}", stdout(&o));
}

#[test]
fn analyze_json_lists_strided_reductions() {
    let o = featspace(&["analyze", "design1_conv", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let reductions: Vec<&str> = v["reductions"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
    assert_eq!(reductions, ["block2", "block4", "block6"]);
    assert_eq!(v["total_params_k"], 20948);
}

#[test]
fn strict_fails_on_pool_first() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("pool_first.spec");
    fs::write(&spec, "p: max_pool\nc: 2 x conv3x3, 1, 8\nout: 1 x conv1x1, 1, 10\n").unwrap();
    let spec = spec.to_str().unwrap();
    let strict = featspace(&["analyze", spec, "--strict"]);
    assert_eq!(strict.status.code(), Some(1), "{}", stdout(&strict));
    assert!(stdout(&strict).contains("RULE-MIN-CONV"));
    assert_eq!(featspace(&["analyze", spec]).status.code(), Some(0));
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    fs::write(&spec, "a: conv3x3, 8\nb: avg_pool\n").unwrap();
    let o = featspace(&["analyze", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.spec:2:"), "{}", stderr(&o));
}

#[test]
fn analyze_info_report() {
    let o = featspace(&["analyze", "design1", "--scale", "tiny", "--info", "--info-batch", "24", "--sample-dims", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("block2"));
}

#[test]
fn train_smoke_and_lr_column() {
    let dir = tempfile::tempdir().unwrap();
    for policy in ["poly", "fixed"] {
        let runfile = write_runfile(dir.path(), policy, 2);
        let o = featspace(&["train", &runfile]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = dir.path().join(format!("out-{policy}"));
        for f in ["metrics.csv", "summary.json", "config.toml"] {
            assert!(out.join(f).is_file(), "{policy}: {f}");
        }
        let log = MetricsLog::from_csv(&fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
        assert_eq!(log.epochs.len(), 2);
        let cfg = RunFile::load(Path::new(&runfile)).unwrap().train_config();
        let total = total_iterations(&cfg, 64);
        let policy_resolved: DecayPolicy = cfg.policy.resolve(total);
        let per_epoch = total / 2;
        for e in &log.epochs {
            let want = policy_resolved.lr_at((e.epoch as u64 - 1) * per_epoch);
            assert_eq!(e.lr, want, "{policy} epoch {}", e.epoch);
        }
    }
}

#[test]
fn train_without_dataset_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cifar.toml");
    fs::write(&path, "design = \"design1\"\nscale = \"small\"\n").unwrap();
    let o = featspace(&["train", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(DATASET_ENV), "{}", stderr(&o));
}

#[test]
fn report_over_runs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = featspace(&["report", dir.path().to_str().unwrap()]);
    assert!(empty.status.success());
    assert_eq!(stdout(&empty), "");

    let runfile = write_runfile(dir.path(), "poly", 1);
    assert!(featspace(&["train", &runfile, "--output", dir.path().join("r/b").to_str().unwrap()]).status.success());
    let single = featspace(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(stdout(&single).lines().count(), 3, "{}", stdout(&single));

    let spec = dir.path().join("aaa.spec");
    fs::write(&spec, "net: aaa\nc: conv3x3, 8\np: max_pool\nout: 1 x conv1x1, 1, 10\n").unwrap();
    let other = dir.path().join("other.toml");
    fs::write(
        &other,
        "spec = \"aaa.spec\"\nscale = \"full\"\nsynthetic = true\ntrain_images = 32\ntest_images = 16\n\
         output = \"r/a\"\n[train]\nepochs = 1\nbatch_size = 16\n",
    )
    .unwrap();
    assert!(featspace(&["train", other.to_str().unwrap()]).status.success());
    let two = featspace(&["report", dir.path().to_str().unwrap(), "--csv"]);
    let models: Vec<String> = stdout(&two).lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(models, ["aaa", "design1"]);
}

#[test]
fn tiny_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let o = featspace(&[
        "ablate",
        "conv_vs_pool",
        "--scale",
        "tiny",
        "--synthetic",
        "--seeds",
        "1",
        "--epochs",
        "1",
        "--train-images",
        "64",
        "--test-images",
        "32",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("| design 1_conv | 20948 |"), "{text}");
    assert!(text.contains("| design 1 (max_pooling) | 20173 |"), "{text}");
    assert!(dir.path().join("conv_vs_pool/ablation.md").is_file());
}

#[test]
fn designs_export() {
    let dir = tempfile::tempdir().unwrap();
    let o = featspace(&["designs", "--export", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("design4.spec")).unwrap();
    assert!(text.contains("block3_1: block2_1 + block3"), "{text}");
    let again = featspace(&["analyze", dir.path().join("design4.spec").to_str().unwrap()]);
    assert!(stdout(&again).contains("21584K"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let rf = RunFile::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            rf.spec().unwrap();
            rf.train_config().validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 3);
}
