//! Drives the `cellfree` binary end to end on a small network.

use std::path::Path;
use std::process::{Command, Output};

use cellfree::harness::{Checkpoint, Dataset, RunReport, SplitKind};

const CONFIG: &str = r#"
[system]
num_aps = 8
num_users = 2

[train]
iterations = 60
batch_size = 20
validation_every = 20
finetune_iterations = 10
"#;

fn cellfree(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellfree"))
        .arg("--config")
        .arg(dir.join("small.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cellfree(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(dir: &Path, args: &[&str]) -> i32 {
    cellfree(dir, args).status.code().expect("exit code")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn full_pipeline_runs_and_audits() {
    let dir = setup();
    let d = dir.path();
    let run = d.join("run");
    ok(d, &["--seed", "5", "gen-data", "--train", "200", "--validation", "40", "--test", "30"]);
    ok(d, &["train"]);
    assert!(run.join("history.csv").exists());
    ok(d, &["solve-baseline"]);
    ok(d, &["eval", "--method", "dnn"]);
    ok(d, &["eval", "--method", "max-power"]);
    ok(d, &["finetune"]);
    for stem in ["baseline-test", "dnn-test", "max-power-test", "dnn-online-test"] {
        let json = run.join(format!("{stem}.json"));
        let audit = ok(d, &["audit", "--report", json.to_str().unwrap()]);
        assert!(audit.contains("audited 30 samples"), "{audit}");
    }
    let table = ok(d, &["report"]);
    assert!(table.contains("dnn-online") && table.contains("baseline"));
    assert!(run.join("table.md").exists());

    let baseline = RunReport::load(&run.join("baseline-test.json")).unwrap();
    let dnn = RunReport::load(&run.join("dnn-test.json")).unwrap();
    let online = RunReport::load(&run.join("dnn-online-test.json")).unwrap();
    assert!(baseline.summary.average_min_rate >= dnn.summary.average_min_rate);
    for (o, p) in online.records.iter().zip(&dnn.records) {
        assert!(o.min_rate >= p.min_rate);
    }
    let ck = Checkpoint::load(&run.join("model.cfck")).unwrap();
    assert_eq!(ck.model.widths(), vec![16, 16, 2, 8, 2]);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (setup(), setup());
    for dir in [&a, &b] {
        ok(dir.path(), &["--seed", "9", "gen-data", "--train", "120", "--validation", "20", "--test", "10"]);
        ok(dir.path(), &["train"]);
        ok(dir.path(), &["eval", "--method", "dnn"]);
    }
    for file in ["train.cfmm", "test.cfmm", "model.cfck"] {
        let read = |dir: &tempfile::TempDir| std::fs::read(dir.path().join("run").join(file)).unwrap();
        assert!(read(&a) == read(&b), "{file} differs");
    }
    // everything but the wall-clock column
    let rows = |dir: &tempfile::TempDir| -> Vec<String> {
        std::fs::read_to_string(dir.path().join("run").join("dnn-test.csv"))
            .unwrap()
            .lines()
            .map(|l| {
                let mut cells: Vec<&str> = l.split(',').collect();
                cells.remove(1);
                cells.join(",")
            })
            .collect()
    };
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn refuses_overwrite_without_force() {
    let dir = setup();
    let d = dir.path();
    let gen = ["--seed", "1", "gen-data", "--train", "10", "--validation", "5", "--test", "5"];
    ok(d, &gen);
    assert_eq!(exit_code(d, &gen), 2);
    let mut forced = vec!["--force"];
    forced.extend(gen);
    ok(d, &forced);
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = setup();
    let d = dir.path();
    // missing dataset
    assert_eq!(exit_code(d, &["solve-baseline"]), 2);
    ok(d, &["gen-data", "--train", "10", "--validation", "5", "--test", "5"]);
    // missing checkpoint
    assert_eq!(exit_code(d, &["eval", "--method", "dnn"]), 2);

    let test = SplitKind::Test.file_in(&d.join("run"));
    let mut bytes = std::fs::read(&test).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&test, bytes).unwrap();
    assert_eq!(exit_code(d, &["solve-baseline"]), 3);
    assert!(Dataset::load(&test).is_err());

    std::fs::write(d.join("small.toml"), "[system]\nnum_users = 0\n").unwrap();
    assert_eq!(exit_code(d, &["solve-baseline"]), 2);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["gen-data", "--train", "10", "--validation", "5", "--test", "5"]);
    std::fs::write(d.join("small.toml"), "[system]\nnum_aps = 9\nnum_users = 2\n").unwrap();
    assert_eq!(exit_code(d, &["solve-baseline"]), 2);
}
