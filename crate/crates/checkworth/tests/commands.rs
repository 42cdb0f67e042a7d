use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn checkworth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_checkworth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = checkworth(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

/// Small, fast model settings.
const TINY: &[&str] = &[
    "--embeddings",
    "random",
    "--embedding-dim",
    "4",
    "--hidden",
    "4",
    "--batch",
    "8",
    "--epochs",
    "2",
    "--learning-rate",
    "0.01",
    "--repetitions",
    "2",
];

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn embed_writes_vectors_of_the_requested_width() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vectors.txt");
    let gold = fixture("gold.jsonl");
    ok(&[
        "embed",
        "--corpus",
        &gold,
        "--out",
        &p(&out),
        "--dim",
        "50",
        "--epochs",
        "1",
        "--sidecar",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "109 50");
    assert!(text.lines().skip(1).all(|l| l.split(' ').count() == 51));
    assert!(dir.path().join("vectors.txt.vec").exists());
    let manifest = json(&dir.path().join("vectors.txt.manifest.json"));
    assert_eq!(manifest["config"]["skipgram"]["window"], 5);
    assert_eq!(manifest["config"]["skipgram"]["negatives_per_word"], 25);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn embed_without_corpus_is_a_usage_error() {
    let out = checkworth(&["embed", "--out", "x.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--corpus"));
}

#[test]
fn eval_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("gold.jsonl");
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["eval", "--gold", &gold, "--seed", "11", "--jobs", jobs];
        args.extend_from_slice(TINY);
        let o = p(&out);
        args.extend(["--out", &o]);
        ok(&args);
        ["report.json", "summary.txt", "folds.csv"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let report: Value = serde_json::from_slice(&a[0]).unwrap();
    assert_eq!(report["folds"], 4);
    assert_eq!(report["per_query"].as_array().unwrap().len(), 8);
    assert!(report["significance"].is_null());
    let csv = String::from_utf8(a[2].clone()).unwrap();
    assert!(csv.starts_with("fold,repetition,query,positives,items,MAP,P@5,P@10,P@20,P@R\n"));
    assert_eq!(csv.lines().count(), 9);
    let manifest = json(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["pipeline"]["train"]["hidden_size"], 4);
    assert_eq!(manifest["inputs"][0]["role"], "gold");
}

#[test]
fn eval_rejects_an_empty_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("gold.jsonl");
    let out = p(&dir.path().join("o"));
    let o = checkworth(&[
        "eval",
        "--gold",
        &gold,
        "--embeddings",
        "none",
        "--no-dep",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("embeddings, dependency tags, or both"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn weak_eval_compares_against_a_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (gold, weak) = (fixture("gold.jsonl"), fixture("weak.jsonl"));
    let base = dir.path().join("plain");
    let mut args = vec!["eval", "--gold", &gold];
    args.extend_from_slice(TINY);
    let b = p(&base);
    ok(&[args.clone(), vec!["--out", &b]].concat());
    let report = base.join("report.json");
    let r = p(&report);
    let out = dir.path().join("weak");
    let w = p(&out);
    let stdout = ok(&[
        args,
        vec![
            "--weak",
            &weak,
            "--mode",
            "binarize",
            "--compare",
            &r,
            "--name",
            "weak",
            "--out",
            &w,
        ],
    ]
    .concat())
    .stdout;
    let summary = String::from_utf8(stdout).unwrap();
    assert!(summary.contains("paired t-test against"));
    let weak_report = json(&out.join("report.json"));
    let tests = &weak_report["significance"]["tests"];
    for m in ["MAP", "P@5", "P@10", "P@20", "P@R"] {
        let pv = tests[m]["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&pv), "{m}: {pv}");
    }
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["pipeline"]["weak"]["mode"], "binarize");
}

#[test]
fn train_rank_explain() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("gold.jsonl");
    let model = dir.path().join("model.json");
    let m = p(&model);
    ok(&[vec!["train", "--gold", &gold, "--out", &m], TINY.to_vec()].concat());
    assert!(dir.path().join("model.json.manifest.json").exists());

    let ranking = dir.path().join("rank.csv");
    ok(&[
        "rank",
        "--model",
        &m,
        "--input",
        &gold,
        "--out",
        &p(&ranking),
    ]);
    let text = std::fs::read_to_string(&ranking).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 24);
    let scores: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(rows[0][0], "1");

    let per = dir.path().join("per.csv");
    ok(&[
        "rank",
        "--model",
        &m,
        "--input",
        &gold,
        "--per-speech",
        "--out",
        &p(&per),
    ]);
    let text = std::fs::read_to_string(&per).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("1,")).count(), 4);

    let html = dir.path().join("e.html");
    ok(&[
        "explain",
        "--model",
        &m,
        "--input",
        &gold,
        "--format",
        "html",
        "--top",
        "3",
        "--out",
        &p(&html),
    ]);
    let doc = std::fs::read_to_string(&html).unwrap();
    assert!(doc.starts_with("<!DOCTYPE html>"));
    assert_eq!(doc.matches("<tr><td>").count(), 3);

    let js = ok(&[
        "explain", "--model", &m, "--input", &gold, "--format", "json", "--ids", "g00,g03",
    ])
    .stdout;
    let v: Value = serde_json::from_slice(&js).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["id"], "g03");
    let alphas: f64 = v[0]["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["alpha"].as_f64().unwrap())
        .sum();
    assert!((alphas - 1.0).abs() < 1e-9);

    let ansi = ok(&[
        "explain", "--model", &m, "--input", &gold, "--format", "ansi", "--ids", "g00",
    ])
    .stdout;
    assert!(String::from_utf8(ansi).unwrap().contains("\x1b[48;5;124m"));

    let missing = checkworth(&["explain", "--model", &m, "--input", &gold, "--ids", "nope"]);
    assert!(!missing.status.success());
}

#[test]
fn tampered_checkpoints_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("gold.jsonl");
    let model = dir.path().join("model.json");
    let m = p(&model);
    ok(&[vec!["train", "--gold", &gold, "--out", &m], TINY.to_vec()].concat());
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(&model, text.replacen("\"nsubj\"", "\"nsubjpass\"", 1)).unwrap();
    let o = checkworth(&[
        "rank",
        "--model",
        &m,
        "--input",
        &gold,
        "--out",
        &p(&dir.path().join("r.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tag set hash mismatch"));
}

#[test]
fn sweep_defaults_emit_eleven_fractions_by_five_resamples() {
    let dir = tempfile::tempdir().unwrap();
    let (gold, weak) = (fixture("gold.jsonl"), fixture("weak.jsonl"));
    let out = dir.path().join("sweep.csv");
    let o = p(&out);
    let mut args = vec![
        "sweep", "--gold", &gold, "--weak", &weak, "--out", &o, "--jobs", "4",
    ];
    args.extend_from_slice(&TINY[..8]);
    args.extend([
        "--repetitions",
        "1",
        "--epochs",
        "1",
        "--pretrain-epochs",
        "1",
    ]);
    ok(&args);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "fraction,repetition,MAP,P@5,P@10,P@20,P@R"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 55);
    assert!(rows[0].starts_with("0,0,"));
    assert!(rows[54].starts_with("1,4,"));

    let no_weak = checkworth(&["sweep", "--gold", &gold, "--out", &o]);
    assert_eq!(no_weak.status.code(), Some(1));
}

#[test]
fn overlap_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("overlap.csv");
    ok(&[
        "overlap",
        "--data",
        &fixture("overlap.jsonl"),
        "--out",
        &p(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows[0][..3], ["checkworthy", "7", "0"]);
    assert_eq!(rows[1][0], "non_checkworthy");
    assert!((rows[2][1].parse::<f64>().unwrap() - 0.5).abs() < 0.1);

    let stats = dir.path().join("stats.csv");
    let hist = dir.path().join("hist.csv");
    ok(&[
        "stats",
        "--gold",
        &fixture("gold.jsonl"),
        "--weak",
        &fixture("weak.jsonl"),
        "--bins",
        "4",
        "--histogram",
        &p(&hist),
        "--out",
        &p(&stats),
    ]);
    let text = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(
        text.lines().nth(1).unwrap(),
        format!("gold,4,24,{},108,{}", 163.0 / 24.0, 11.0 / 24.0)
    );
    let h = std::fs::read_to_string(&hist).unwrap();
    assert!(h.starts_with("dataset,speaker,bin_low,bin_high,count\ngold,Speaker A,0,0.25,"));
    assert_eq!(h.lines().count(), 1 + 2 * 3 * 4);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# tiny settings\nhidden = 3\nseed = 5\nepochs = 2\nrepetitions = 2\nembeddings = random\nembedding_dim = 4\nlearning-rate = 0.01\ntypo = 1\n").unwrap();
    let gold = fixture("gold.jsonl");
    let c = p(&cfg);
    let run = |extra: &[&str], name: &str| {
        let out = dir.path().join(name);
        let o = p(&out);
        let mut args = vec!["eval", "--config", &c, "--gold", &gold, "--out", &o];
        args.extend_from_slice(extra);
        let stderr = String::from_utf8(ok(&args).stderr).unwrap();
        (json(&out.join("manifest.json")), stderr)
    };
    let (m, stderr) = run(&[], "file");
    assert_eq!(m["config"]["pipeline"]["train"]["hidden_size"], 3);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["pipeline"]["train"]["batch_size"], 64);
    assert!(stderr.contains("config key `typo` is not used"));
    let (m, _) = run(&["--hidden", "5", "--seed", "6"], "flag");
    assert_eq!(m["config"]["pipeline"]["train"]["hidden_size"], 5);
    assert_eq!(m["seed"], 6);

    std::fs::write(&cfg, "hidden = lots\n").unwrap();
    let o = checkworth(&[
        "eval",
        "--config",
        &c,
        "--gold",
        &gold,
        "--out",
        &p(&dir.path().join("x")),
    ]);
    assert!(String::from_utf8_lossy(&o.stderr)
        .contains("config line 1: invalid value `lots` for `hidden`"));
}
