use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rqa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqa"))
        .args(args)
        .current_dir(dir)
        .env_remove("RQA_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rqa(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL_CONFIG: &str = r#"
loss = "l2"
aggregation = "attention"
embedding_dim = 16
hidden_dim = 8
max_epochs = 6

[grids]
gamma = [0.03125]
"#;

fn workspace(pos: &str, neg: &str, unl: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--pos", pos, "--neg", neg, "--unlabeled", unl, "--seed", "7", "--out", "c.jsonl"]);
    fs::write(dir.path().join("l2.toml"), SMALL_CONFIG).unwrap();
    dir
}

fn labeled_ids(dir: &Path) -> (Vec<String>, Vec<String>) {
    let mut ids = Vec::new();
    for line in read(dir, "c.jsonl").lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v["label"].as_i64() != Some(0) {
            ids.push(v["id"].as_str().unwrap().to_string());
        }
    }
    let val = ids.split_off(ids.len() * 2 / 3);
    (ids, val)
}

fn parse_scores(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .map(|l| {
            let (id, s) = l.split_once(',').unwrap();
            (id.to_string(), s.parse().unwrap())
        })
        .collect()
}

#[test]
fn synth_writes_one_line_per_resume() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--pos", "33", "--neg", "89", "--unlabeled", "1000", "--seed", "7", "--out", "c.jsonl"]);
    assert_eq!(read(dir.path(), "c.jsonl").lines().count(), 1122);

    ok(dir.path(), &["synth", "--pos", "0", "--neg", "0", "--unlabeled", "0", "--seed", "1", "--out", "e.jsonl"]);
    assert_eq!(read(dir.path(), "e.jsonl"), "");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = TempDir::new().unwrap();
    let out = rqa(dir.path(), &["synth", "--pos", "1", "--neg", "1", "--unlabeled", "0"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&rqa(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&rqa(dir.path(), &["--help"])), 0);
}

#[test]
fn unwritable_output_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = rqa(dir.path(), &["synth", "--pos", "1", "--neg", "1", "--unlabeled", "0", "--out", "missing/dir/c.jsonl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn seed_variable_overrides_flag() {
    let dir = TempDir::new().unwrap();
    let run = |seed_flag: &str, env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rqa"));
        cmd.args(["synth", "--pos", "3", "--neg", "3", "--unlabeled", "3", "--seed", seed_flag, "--out", out])
            .current_dir(dir.path())
            .env_remove("RQA_SEED");
        if let Some(v) = env {
            cmd.env("RQA_SEED", v);
        }
        assert!(cmd.status().unwrap().success());
        read(dir.path(), out)
    };
    let a = run("1", Some("5"), "a.jsonl");
    let b = run("5", None, "b.jsonl");
    let c = run("1", None, "c.jsonl");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn train_score_eval_round_trip() {
    let dir = workspace("8", "12", "10");
    let d = dir.path();
    let (train, val) = labeled_ids(d);
    let args = [
        "train", "--corpus", "c.jsonl", "--config", "l2.toml", "--model-out", "m.json",
        "--train-ids", &train.join(","), "--val-ids", &val.join(","),
    ];
    ok(d, &args);
    let model = read(d, "m.json");
    let history = read(d, "m.json.history.csv");
    assert!(history.starts_with("epoch,train_loss,val_auc\n"));

    // Same seed, same bytes.
    ok(d, &args);
    assert_eq!(read(d, "m.json"), model);

    ok(d, &["score", "--model", "m.json", "--corpus", "c.jsonl", "--out", "s.csv"]);
    let scores = parse_scores(&read(d, "s.csv"));
    assert_eq!(scores.len(), 30);
    assert!(scores.iter().all(|(_, s)| *s > -1.0 && *s < 1.0));
    let corpus_order: Vec<String> = read(d, "c.jsonl")
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(scores.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>(), corpus_order);

    // Scores on the validation ids reproduce the best AUC in the history.
    let val_rows: String = scores
        .iter()
        .filter(|(id, _)| val.contains(id))
        .map(|(id, s)| format!("{id},{s}\n"))
        .collect();
    fs::write(d.join("val.csv"), val_rows).unwrap();
    ok(d, &["eval", "--scores", "val.csv", "--corpus", "c.jsonl", "--out", "val.json"]);
    let report: serde_json::Value = serde_json::from_str(&read(d, "val.json")).unwrap();
    let best = history
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(report["auc"].as_f64().unwrap(), best);

    // Full corpus evaluation ignores unlabeled rows and writes ROC endpoints.
    ok(d, &["eval", "--scores", "s.csv", "--corpus", "c.jsonl", "--out", "r.json", "--roc-out", "roc.csv"]);
    let roc = read(d, "roc.csv");
    assert_eq!(roc.lines().next(), Some("0,0"));
    assert_eq!(roc.lines().last(), Some("1,1"));
}

#[test]
fn auto_split_training_is_deterministic() {
    let dir = workspace("8", "12", "10");
    let d = dir.path();
    let args = ["train", "--corpus", "c.jsonl", "--config", "l2.toml", "--model-out", "m.json", "--auto-split"];
    ok(d, &args);
    let first = read(d, "m.json");
    ok(d, &args);
    assert_eq!(read(d, "m.json"), first);
}

#[test]
fn triplet_with_one_positive_is_a_config_error() {
    let dir = workspace("2", "6", "0");
    let d = dir.path();
    fs::write(d.join("t.toml"), SMALL_CONFIG.replace("\"l2\"", "\"triplet\"")).unwrap();
    let (mut train, mut val) = labeled_ids(d);
    // Keep exactly one positive in the training ids.
    let labels: Vec<(String, i64)> = read(d, "c.jsonl")
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["id"].as_str().unwrap().to_string(), v["label"].as_i64().unwrap())
        })
        .collect();
    let positives: Vec<&String> = labels.iter().filter(|(_, y)| *y == 1).map(|(id, _)| id).collect();
    train.retain(|id| id != positives[1]);
    val.retain(|id| id != positives[0]);
    if !train.contains(positives[0]) {
        train.push(positives[0].clone());
    }
    if !val.contains(positives[1]) {
        val.push(positives[1].clone());
    }
    let out = rqa(
        d,
        &["train", "--corpus", "c.jsonl", "--config", "t.toml", "--model-out", "m.json",
          "--train-ids", &train.join(","), "--val-ids", &val.join(",")],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("m.json").exists());
}

#[test]
fn bad_config_exits_three() {
    let dir = workspace("4", "4", "0");
    let d = dir.path();
    fs::write(d.join("bad.toml"), "loss = \"hinge\"\n").unwrap();
    let out = rqa(d, &["train", "--corpus", "c.jsonl", "--config", "bad.toml", "--model-out", "m.json", "--auto-split"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn cv_writes_report_and_roc_files() {
    let dir = workspace("8", "12", "10");
    let d = dir.path();
    ok(d, &["cv", "--corpus", "c.jsonl", "--config", "l2.toml", "--shuffles", "2", "--out", "cv.json", "--roc-dir", "roc"]);
    let report: serde_json::Value = serde_json::from_str(&read(d, "cv.json")).unwrap();
    let shuffles = report["shuffles"].as_array().unwrap();
    assert_eq!(shuffles.len(), 2);
    for s in shuffles {
        assert_eq!(s["scores"].as_object().unwrap().len(), 20);
        assert_eq!(s["cells"].as_array().unwrap().len(), 5);
    }
    for s in 0..2 {
        assert!(d.join(format!("roc/roc_shuffle_{s:02}.csv")).exists());
    }

    ok(d, &["cv", "--corpus", "c.jsonl", "--config", "l2.toml", "--shuffles", "1", "--out", "one.json"]);
    let one: serde_json::Value = serde_json::from_str(&read(d, "one.json")).unwrap();
    assert_eq!(one["shuffles"].as_array().unwrap().len(), 1);
}

#[test]
fn cv_with_three_labeled_exits_three() {
    let dir = workspace("1", "2", "5");
    let out = rqa(dir.path(), &["cv", "--corpus", "c.jsonl", "--config", "l2.toml", "--out", "cv.json"]);
    assert_eq!(code(&out), 3);
    assert!(!dir.path().join("cv.json").exists());
}

#[test]
fn score_handles_degenerate_and_empty_corpora() {
    let dir = workspace("4", "4", "2");
    let d = dir.path();
    ok(d, &["train", "--corpus", "c.jsonl", "--config", "l2.toml", "--model-out", "m.json", "--auto-split"]);

    let first = read(d, "c.jsonl").lines().next().unwrap().to_string();
    let mut v: serde_json::Value = serde_json::from_str(&first).unwrap();
    v["skills"] = serde_json::json!([]);
    fs::write(d.join("noskills.jsonl"), format!("{v}\n")).unwrap();
    ok(d, &["score", "--model", "m.json", "--corpus", "noskills.jsonl", "--out", "n.csv"]);
    let s = parse_scores(&read(d, "n.csv"));
    assert_eq!(s.len(), 1);
    assert!(s[0].1.abs() < 1.0);

    fs::write(d.join("empty.jsonl"), "").unwrap();
    ok(d, &["score", "--model", "m.json", "--corpus", "empty.jsonl", "--out", "e.csv"]);
    assert_eq!(read(d, "e.csv"), "");
}

#[test]
fn score_with_mismatched_embeddings_exits_two() {
    let dir = workspace("4", "4", "2");
    let d = dir.path();
    ok(d, &["train", "--corpus", "c.jsonl", "--config", "l2.toml", "--model-out", "m.json", "--auto-split"]);
    ok(d, &["embed", "--corpus", "c.jsonl", "--dim", "8", "--out", "e8.jsonl"]);
    let out = rqa(d, &["score", "--model", "m.json", "--corpus", "c.jsonl", "--embeddings", "e8.jsonl", "--out", "s.csv"]);
    assert_eq!(code(&out), 2);
    assert!(!d.join("s.csv").exists());
}

#[test]
fn precomputed_table_matches_fallback_scores() {
    let dir = workspace("4", "4", "2");
    let d = dir.path();
    ok(d, &["embed", "--corpus", "c.jsonl", "--dim", "16", "--out", "e16.jsonl"]);
    ok(d, &["train", "--corpus", "c.jsonl", "--config", "l2.toml", "--model-out", "m.json", "--auto-split"]);
    ok(d, &["score", "--model", "m.json", "--corpus", "c.jsonl", "--out", "a.csv"]);
    ok(d, &["score", "--model", "m.json", "--corpus", "c.jsonl", "--embeddings", "e16.jsonl", "--out", "b.csv"]);
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
}

#[test]
fn eval_perfect_scores_and_error_paths() {
    let dir = workspace("5", "5", "3");
    let d = dir.path();
    let rows: String = read(d, "c.jsonl")
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            let score = match v["label"].as_i64().unwrap() {
                1 => 0.9,
                -1 => -0.9,
                _ => 0.0,
            };
            format!("{},{score}\n", v["id"].as_str().unwrap())
        })
        .collect();
    fs::write(d.join("perfect.csv"), &rows).unwrap();
    ok(d, &["eval", "--scores", "perfect.csv", "--corpus", "c.jsonl", "--out", "r.json"]);
    let r: serde_json::Value = serde_json::from_str(&read(d, "r.json")).unwrap();
    for key in ["auc", "f1", "ap"] {
        assert_eq!(r[key].as_f64(), Some(1.0), "{key}");
    }

    fs::write(d.join("stranger.csv"), format!("{rows}nobody,0.5\n")).unwrap();
    assert_eq!(code(&rqa(d, &["eval", "--scores", "stranger.csv", "--corpus", "c.jsonl", "--out", "x.json"])), 2);

    ok(d, &["synth", "--pos", "0", "--neg", "0", "--unlabeled", "4", "--seed", "2", "--out", "u.jsonl"]);
    ok(d, &["train", "--corpus", "c.jsonl", "--config", "l2.toml", "--model-out", "m.json", "--auto-split"]);
    ok(d, &["score", "--model", "m.json", "--corpus", "u.jsonl", "--out", "u.csv"]);
    let out = rqa(d, &["eval", "--scores", "u.csv", "--corpus", "u.jsonl", "--out", "u.json"]);
    assert_eq!(code(&out), 2);
    assert!(!d.join("u.json").exists());
}

#[test]
fn commands_leave_inputs_untouched() {
    let dir = workspace("5", "5", "5");
    let d = dir.path();
    let before = read(d, "c.jsonl");
    ok(d, &["embed", "--corpus", "c.jsonl", "--dim", "16", "--out", "e.jsonl"]);
    ok(d, &["train", "--corpus", "c.jsonl", "--config", "l2.toml", "--embeddings", "e.jsonl", "--model-out", "m.json", "--auto-split"]);
    assert_eq!(read(d, "c.jsonl"), before);
    let leftovers: Vec<PathBuf> = fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}
