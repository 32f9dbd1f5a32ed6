use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybrid_core::data::{write_dataset, Provenance};
use hybrid_core::synthetic::{generate, LabelStyle};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybridclf"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn hybridclf")
}

fn corpus(dir: &Path) -> PathBuf {
    let path = dir.join("data.csv");
    write_dataset(&path, &generate(60, 5, LabelStyle::Mixed, 0), Provenance::Original).unwrap();
    path
}

fn train(dir: &Path, out: &str, epochs: &str) -> Output {
    run(
        &[
            "train",
            "--data",
            "data.csv",
            "--seed",
            "9",
            "--epochs",
            epochs,
            "--lr",
            "1e-3",
            "--batch-size",
            "8",
            "--out",
            out,
            "--set",
            "min_freq=1",
            "--set",
            "script=latin",
        ],
        dir,
    )
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_is_reproducible_and_evaluate_reads_its_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    for out in ["a", "b"] {
        let o = train(dir, out, "2");
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in [
        "curve.csv",
        "model.ckpt",
        "vocab.txt",
        "counts.tsv",
        "test.csv",
        "validation.csv",
    ] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let curve = fs::read_to_string(dir.join("a/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert!(curve.starts_with("epoch,train_loss,val_loss,val_acc"));

    let o = run(
        &[
            "evaluate",
            "--checkpoint",
            "a/model.ckpt",
            "--split",
            "a/test.csv",
            "--seed",
            "9",
            "--out",
            "eval",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(dir.join("eval/report.txt")).unwrap();
    assert!(report.contains("hamming_loss=") && report.contains("averaging=macro"));
    assert!(fs::read_dir(dir.join("eval")).unwrap().any(|e| e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .starts_with("roc_")));
}

#[test]
fn zero_epochs_saves_initialisation() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path());
    let o = train(tmp.path(), "z", "0");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(tmp.path().join("z/curve.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
    assert!(tmp.path().join("z/model.ckpt").is_file());
}

#[test]
fn resample_then_evaluate_refuses_resampled_split() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    let o = run(
        &[
            "resample",
            "--data",
            "data.csv",
            "--sampling",
            "under",
            "--seed",
            "2",
            "--out",
            "rs",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("split\ttype\tbully\tsexual\treligious\tthreat\tspam"));
    assert!(table.contains("train\tundersampled\t"));
    let resampled = fs::read_to_string(dir.join("rs/train_undersampled.csv")).unwrap();
    assert!(resampled.starts_with("# provenance=undersampled"));

    assert!(train(dir, "m", "0").status.success());
    let o = run(
        &[
            "evaluate",
            "--checkpoint",
            "m/model.ckpt",
            "--split",
            "rs/train_undersampled.csv",
            "--seed",
            "1",
        ],
        dir,
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("undersampled"));
}

#[test]
fn explain_writes_text_and_tsv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    assert!(train(dir, "m", "1").status.success());
    let o = run(
        &[
            "explain",
            "--checkpoint",
            "m/model.ckpt",
            "--text",
            "the zorvak went home",
            "--labels",
            "bully,spam",
            "--seed",
            "4",
            "--out",
            "ex",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = fs::read_to_string(dir.join("ex/explanation.tsv")).unwrap();
    assert!(tsv.starts_with("label\trank\ttoken\tweight"));
    assert!(tsv
        .lines()
        .skip(1)
        .all(|l| l.starts_with("bully\t") || l.starts_with("spam\t")));
    assert!(fs::read_to_string(dir.join("ex/explanation.txt"))
        .unwrap()
        .contains("label=bully"));
}

#[test]
fn crossval_emits_fold_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    let o = run(
        &[
            "crossval",
            "--data",
            "data.csv",
            "--seed",
            "3",
            "--epochs",
            "1",
            "--folds",
            "3",
            "--out",
            "cv",
            "--set",
            "min_freq=1",
            "--set",
            "n_layers=1",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.join("cv/crossval.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(rows, ["fold", "1", "2", "3", "average", "std"]);
    assert!(fs::read_to_string(dir.join("cv/crossval_report.txt"))
        .unwrap()
        .contains("accuracy_std="));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    let cases: [&[&str]; 5] = [
        &["train", "--data", "data.csv", "--epochs", "1"],
        &["train", "--data", "missing.csv", "--seed", "1", "--epochs", "1"],
        &["train", "--data", "data.csv", "--seed", "1"],
        &[
            "train",
            "--data",
            "data.csv",
            "--seed",
            "1",
            "--epochs",
            "1",
            "--set",
            "nonsense=1",
        ],
        &[
            "train", "--data", "data.csv", "--seed", "1", "--epochs", "1", "--config", "nope.cfg",
        ],
    ];
    for args in cases {
        assert_eq!(run(args, dir).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_supplies_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    corpus(dir);
    fs::write(
        dir.join("run.cfg"),
        "# small run\ndata = data.csv\nepochs = 1\nmin_freq = 1\nout = fromcfg\n",
    )
    .unwrap();
    let o = run(&["train", "--config", "run.cfg", "--seed", "1"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("fromcfg/model.ckpt").is_file());
    let saved = fs::read_to_string(dir.join("fromcfg/config.txt")).unwrap();
    assert!(saved.contains("seed = 1") && saved.contains("epochs = 1"));
}
