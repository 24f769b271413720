use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdl_core::checkpoint::{load_checkpoint, Checkpoint, MAGIC};
use mdl_core::datasets::{encode_idx_images, encode_idx_labels};
use mdl_core::linalg::RngState;

fn mdl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = mdl(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn csv_header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

const MIXTURE: [&str; 6] = ["--set", "task=mixture", "--set", "epochs=4", "--set", "mixture_train=200"];

fn train_mixture(cwd: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["train", "--out", out, "--seed", "3", "--seed", "4"];
    args.extend(MIXTURE);
    args.extend(extra);
    ok(&args, cwd);
}

#[test]
fn train_writes_documented_layout() {
    let tmp = tempfile::tempdir().unwrap();
    train_mixture(tmp.path(), "out", &[]);
    let run = tmp.path().join("out/mixture-mdl");
    let names: Vec<String> = tree(&run).keys().map(|p| p.display().to_string()).collect();
    assert_eq!(
        names,
        [
            "checkpoint_seed3.bin",
            "checkpoint_seed4.bin",
            "config.echo",
            "metrics_seed3.csv",
            "metrics_seed4.csv",
            "summary.csv"
        ]
    );
    assert_eq!(
        csv_header(&run.join("metrics_seed3.csv")),
        ["run_id", "seed", "epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"]
    );
    let metrics = csv_rows(&run.join("metrics_seed3.csv"));
    assert_eq!(metrics.len(), 5);
    for (e, row) in metrics.iter().enumerate() {
        assert_eq!(row[0], "mixture-mdl");
        assert_eq!(row[1], "3");
        assert_eq!(row[2], e.to_string());
        assert!(row[3..].iter().all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
    let summary = csv_rows(&run.join("summary.csv"));
    assert_eq!(summary.len(), 5);
    assert!(summary.iter().all(|r| r[1] == "2" && r.len() == 10));

    let bytes = fs::read(run.join("checkpoint_seed3.bin")).unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    match load_checkpoint(&run.join("checkpoint_seed3.bin")).unwrap() {
        Checkpoint::Mdl(net) => {
            assert_eq!(net.widths(), [2, 8, 1]);
            assert_eq!(net.mode_counts(), [3, 3]);
        }
        other => panic!("unexpected {}", other.kind_name()),
    }
}

#[test]
fn reruns_and_config_echo_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    train_mixture(tmp.path(), "a", &[]);
    train_mixture(tmp.path(), "b", &[]);
    let a = tree(&tmp.path().join("a"));
    assert_eq!(a, tree(&tmp.path().join("b")));
    ok(&["train", "--config", "a/mixture-mdl/config.echo", "--out", "c"], tmp.path());
    assert_eq!(a, tree(&tmp.path().join("c")));
}

#[test]
fn every_trainer_produces_its_checkpoint_kind() {
    let tmp = tempfile::tempdir().unwrap();
    for trainer in ["bp", "svd", "lrd"] {
        train_mixture(tmp.path(), "out", &["--set", &format!("trainer={trainer}")]);
        let ckpt = load_checkpoint(&tmp.path().join(format!("out/mixture-{trainer}/checkpoint_seed3.bin"))).unwrap();
        assert_eq!(ckpt.kind_name(), trainer);
    }
}

#[test]
fn missing_mnist_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mdl(&["train", "--out", "out", "--set", "mnist_dir=nowhere"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere/train-images-idx3-ubyte"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bad_configuration_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    for (args, key) in [
        (vec!["train", "--set", "epochs=many"], "epochs"),
        (vec!["train", "--set", "nope=1"], "nope"),
        (vec!["train", "--set", "task=mixture", "--set", "widths=3,4,1"], "widths"),
    ] {
        let out = mdl(&args, tmp.path());
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains(key));
    }
}

#[test]
fn analyses_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    train_mixture(tmp.path(), "out", &[]);
    let ckpt = "out/mixture-mdl/checkpoint_seed3.bin";
    for kind in ["rank", "prune", "dispersion", "overlap", "stages"] {
        let mut args = vec!["analyze", kind, "--checkpoint", ckpt, "--out", "out", "--set", "prune_draws=2"];
        args.extend(MIXTURE);
        ok(&args, tmp.path());
    }
    let dir = tmp.path().join("out/mixture-mdl/analysis");
    let prune = csv_rows(&dir.join("prune.csv"));
    assert_eq!(prune.len(), 20);
    assert_eq!(prune.iter().filter(|r| r[0] == "weakest_first").count(), 10);
    assert_eq!(csv_rows(&dir.join("rank.csv")).len(), 6);
    assert_eq!(csv_rows(&dir.join("dispersion.csv")).len(), 2);
    // 1000 test points; index, label, then 3 + 3 + 8 stage columns.
    let stages = csv_rows(&dir.join("stages.csv"));
    assert_eq!(stages.len(), 1000);
    assert!(stages.iter().all(|r| r.len() == 16));
}

#[test]
fn mode_analyses_reject_dense_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    train_mixture(tmp.path(), "out", &["--set", "trainer=bp"]);
    let mut args = vec!["analyze", "rank", "--checkpoint", "out/mixture-bp/checkpoint_seed3.bin", "--out", "out"];
    args.extend(MIXTURE);
    let out = mdl(&args, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bp network"));
    // Overlap needs only activations and works on any network.
    args[1] = "overlap";
    ok(&args, tmp.path());
}

#[test]
fn powerlaw_fits_each_wide_layer() {
    let tmp = tempfile::tempdir().unwrap();
    train_mixture(tmp.path(), "out", &["--set", "widths=2,16,1", "--set", "modes=12"]);
    ok(
        &["analyze", "powerlaw", "--checkpoint", "out/mixture-mdl/checkpoint_seed3.bin", "--out", "out", "--set", "task=mixture"],
        tmp.path(),
    );
    let rows = csv_rows(&tmp.path().join("out/mixture-mdl/analysis/powerlaw.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[1].parse::<usize>().unwrap() >= 3));
}

#[test]
fn theory_writes_aligned_pairs_per_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "theory", "--out", "out", "--seed", "1", "--seed", "2", "--set", "task=teacher_student", "--set", "ts_d=30,60",
        "--set", "ts_horizon=4", "--set", "ts_record_every=0.5",
    ];
    ok(&args, tmp.path());
    let dir = tmp.path().join("out/teacher_student");
    for d in [30, 60] {
        let theory = csv_rows(&dir.join(format!("theory_d{d}_alpha1.csv")));
        let sim = csv_rows(&dir.join(format!("simulation_d{d}_alpha1.csv")));
        assert_eq!(theory.len(), 9);
        assert_eq!(sim.len(), 9);
        for (t, s) in theory.iter().zip(&sim) {
            assert_eq!(t[0], s[0]);
        }
        // Both start from the same student.
        assert_eq!(theory[0][1].parse::<f64>().unwrap(), sim[0][1].parse::<f64>().unwrap());
        let overlaps = csv_rows(&dir.join(format!("overlaps_d{d}_alpha1.csv")));
        assert_eq!(overlaps.len(), 2 * 9 * 4);
    }
    assert_eq!(csv_rows(&dir.join("theory_summary.csv")).len(), 2);
    let first = tree(&tmp.path().join("out"));
    ok(&args, tmp.path());
    assert_eq!(first, tree(&tmp.path().join("out")));

    let wrong = mdl(&["theory", "--set", "task=mixture"], tmp.path());
    assert_eq!(wrong.status.code(), Some(2));
}

fn fake_mnist(dir: &Path, train: usize, test: usize) {
    let mut rng = RngState::new(5);
    for (prefix, n) in [("train", train), ("t10k", test)] {
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        // Class c lights up a distinct band of pixels.
        let mut pixels = vec![0u8; n * 784];
        for (i, &c) in labels.iter().enumerate() {
            for j in 0..784 {
                let on = j / 78 == c as usize;
                pixels[i * 784 + j] = if on { 200 } else { (rng.below(30)) as u8 };
            }
        }
        fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), encode_idx_images(&pixels, n, 28, 28)).unwrap();
        fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), encode_idx_labels(&labels)).unwrap();
    }
}

#[test]
fn mnist_training_and_leastp_tables() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("mnist")).unwrap();
    fake_mnist(&tmp.path().join("mnist"), 200, 50);
    let common = ["--set", "mnist_dir=mnist", "--set", "epochs=3", "--out", "out"];

    let mut train = vec!["train", "--set", "widths=784,20,10", "--set", "modes=4"];
    train.extend(common);
    ok(&train, tmp.path());
    assert_eq!(csv_rows(&tmp.path().join("out/mnist-mdl/metrics_seed0.csv")).len(), 4);

    let mut single = vec!["leastp", "--set", "leastp_widths=8", "--set", "leastp_grid=2", "--set", "run_id=one"];
    single.extend(common);
    ok(&single, tmp.path());
    let grid = csv_rows(&tmp.path().join("out/one/analysis/leastp_grid.csv"));
    assert_eq!(grid.len(), 2);
    assert_eq!(grid[0][1], "bp");
    assert_eq!(grid[1][1], "2");

    // A rank-one bottleneck cannot separate ten classes as well as the dense net.
    let mut none = vec![
        "leastp", "--set", "leastp_widths=8", "--set", "leastp_grid=1", "--set", "leastp_epsilon=0", "--set",
        "learning_rate=0.1", "--set", "epochs=10", "--set", "run_id=none",
    ];
    none.extend(common);
    ok(&none, tmp.path());
    let table = csv_rows(&tmp.path().join("out/none/analysis/leastp.csv"));
    assert_eq!(table.len(), 1);
    let bp: f64 = table[0][1].parse().unwrap();
    let cell: f64 = csv_rows(&tmp.path().join("out/none/analysis/leastp_grid.csv"))[1][2].parse().unwrap();
    assert!(cell < bp, "p=1 {cell} vs dense {bp}");
    assert_eq!(table[0][2], "above_grid");
}
