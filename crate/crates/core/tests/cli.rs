use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dcl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("dcl runs")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn small() -> Value {
    json!({ "samples_per_class": 5, "trials": 8 })
}

fn small_mlp() -> Value {
    json!({
        "dataset": { "kind": "gmm", "preset": "simplex", "classes": 3, "dim": 4, "separation": 4.0 },
        "samples_per_class": 4,
        "train_samples_per_class": 20,
        "trials": 6,
        "denoiser": { "kind": "mlp", "hidden": [16, 16], "embed_dim": 8, "train": { "steps": 30, "batch_size": 16 } }
    })
}

#[test]
fn classify_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small());
    for out in ["a", "b"] {
        let o = dcl(&["classify", "--config", &cfg, "--out", out, "--seed", "7"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a/predictions.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/predictions.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("index,label,predicted,evaluations,min_error,top_posterior\n"));
    assert_eq!(text.lines().count(), 1 + 20);
}

#[test]
fn trace_has_one_row_per_class_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small());
    let o = dcl(&["classify", "--config", &cfg, "--out", "o", "--trace"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("o/trace.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["input", "class", "trial", "t", "error", "stage", "point_hash"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 20 * 4 * 8);
    // every class of an input sees the same point at a given trial
    for chunk in rows.chunks(4) {
        assert!(chunk.iter().all(|r| r[0] == chunk[0][0] && r[2] == chunk[0][2] && r[6] == chunk[0][6]));
    }
}

#[test]
fn unknown_config_key_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({ "schedule": { "kind": "linear", "stepz": 10 } }));
    let o = dcl(&["benchmark", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schedule.stepz"));
}

#[test]
fn invalid_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({ "trials": 0 }));
    let o = dcl(&["classify", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));
}

#[test]
fn diverging_training_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_mlp();
    config["dataset"] = json!({
        "kind": "gmm", "preset": "explicit",
        "means": [[1e200, 0.0], [0.0, 0.0]],
        "variances": [[1.0, 1.0], [1.0, 1.0]]
    });
    let cfg = write_config(dir.path(), "c.json", &config);
    let o = dcl(&["train", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gradcheck_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcl(&["gradcheck", "--out", "g"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("g/gradcheck.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn loaded_checkpoint_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let trained = small_mlp();
    let cfg = write_config(dir.path(), "train.json", &trained);
    let o = dcl(&["train", "--config", &cfg, "--out", "t"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("t/train_loss.csv").exists());

    let o = dcl(&["classify", "--config", &cfg, "--out", "fresh"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut loaded = trained.clone();
    loaded["denoiser"]["checkpoint"] = json!(dir.path().join("t/checkpoint.dck"));
    let cfg = write_config(dir.path(), "load.json", &loaded);
    let o = dcl(&["classify", "--config", &cfg, "--out", "loaded"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let fresh = std::fs::read(dir.path().join("fresh/predictions.csv")).unwrap();
    let loaded = std::fs::read(dir.path().join("loaded/predictions.csv")).unwrap();
    assert_eq!(fresh, loaded);
}

#[test]
fn winoground_reads_score_files() {
    let dir = tempfile::tempdir().unwrap();
    let scores = "example_id,i,j,score\n\
        a,0,0,2\na,0,1,1\na,1,0,1\na,1,1,2\n\
        b,0,0,1\nb,0,1,2\nb,1,0,2\nb,1,1,1\n";
    std::fs::write(dir.path().join("s.csv"), scores).unwrap();
    let o = dcl(&["winoground", "--scores", "s.csv", "--out", "w"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("text score 0.5000"));
    let mut reader = csv::Reader::from_path(dir.path().join("w/winoground.csv")).unwrap();
    let correct: Vec<String> = reader.records().map(|r| r.unwrap()[5].to_string()).collect();
    assert_eq!(correct, ["true", "false"]);
}

#[test]
fn missing_score_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcl(&["winoground", "--scores", "absent.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
