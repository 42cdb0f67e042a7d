use std::path::PathBuf;

use checkworth::jsonl::{load_jsonl, parse_jsonl, to_jsonl_string};
use checkworth::word2vec::{read_vectors, write_sidecar, write_text};
use checkworth_core::corpus::{build_vocabulary, dataset_stats, DatasetKind, DepTagSet};
use checkworth_core::embedding::random_table;
use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn gold_fixture_loads_cleanly_and_roundtrips() {
    let loaded = load_jsonl(fixture("gold.jsonl"), DatasetKind::Gold).unwrap();
    assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
    assert_eq!(loaded.dataset.len(), 24);
    let original = std::fs::read_to_string(fixture("gold.jsonl")).unwrap();
    assert_eq!(to_jsonl_string(loaded.dataset.sentences()), original);
}

#[test]
fn weak_and_overlap_fixtures_load_cleanly() {
    for (name, kind) in [
        ("weak.jsonl", DatasetKind::Weak),
        ("overlap.jsonl", DatasetKind::Gold),
    ] {
        let loaded = load_jsonl(fixture(name), kind).unwrap();
        assert!(loaded.warnings.is_empty(), "{name}: {:?}", loaded.warnings);
    }
}

#[test]
fn gold_fixture_statistics() {
    // Counted independently from the raw file.
    let d = load_jsonl(fixture("gold.jsonl"), DatasetKind::Gold)
        .unwrap()
        .dataset;
    let s = dataset_stats(&d).unwrap();
    assert_eq!(s.documents, 4);
    assert_eq!(s.sentences, 24);
    assert!((s.mean_length - 163.0 / 24.0).abs() < 1e-12);
    assert_eq!(s.unique_words, 108);
    assert!((s.mean_label.unwrap() - 11.0 / 24.0).abs() < 1e-12);
    assert_eq!(DepTagSet::fit(&[&d]).len(), 27);
}

fn mutate(line: &str, kind: usize, earlier_id: Option<&str>) -> String {
    let mut v: Value = serde_json::from_str(line).unwrap();
    let obj = v.as_object_mut().unwrap();
    match kind {
        0 => drop(obj.remove("id")),
        1 => drop(obj.remove("speech_id")),
        2 => drop(obj.remove("tokens")),
        3 => drop(obj.insert("tokens".into(), json!([]))),
        4 => drop(obj.insert("label".into(), json!(1.3))),
        5 => drop(obj.insert("label".into(), json!(-0.2))),
        6 => drop(obj.insert("label".into(), json!(0.5))),
        7 => drop(obj.insert("label".into(), Value::Null)),
        8 => drop(obj["tokens"][0].as_object_mut().unwrap().remove("dep")),
        9 => drop(
            obj["tokens"][0]
                .as_object_mut()
                .unwrap()
                .insert("text".into(), json!("")),
        ),
        10 => drop(obj.insert("id".into(), json!(7))),
        11 => {
            let s = serde_json::to_string(&v).unwrap();
            return s[..s.len() / 2].to_string();
        }
        12 => drop(obj.insert("label".into(), json!("1"))),
        13 => drop(obj.insert("tokens".into(), json!("We won"))),
        14 => drop(
            obj["tokens"][0]
                .as_object_mut()
                .unwrap()
                .insert("dep".into(), json!("")),
        ),
        15 => drop(obj.insert("speech_id".into(), json!(""))),
        16 => drop(obj["tokens"][0].as_object_mut().unwrap().remove("text")),
        17 => drop(obj.insert(
            "id".into(),
            json!(earlier_id.expect("needs an earlier line")),
        )),
        _ => unreachable!(),
    }
    serde_json::to_string(&v).unwrap()
}

#[test]
fn schema_fuzz_rejects_each_mutation_with_its_line_number() {
    let text = std::fs::read_to_string(fixture("gold.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut rejected = 0;
    for case in 0..100 {
        let kind = case % 18;
        // Duplicate ids need an earlier line to collide with.
        let at = if kind == 17 {
            1 + case % (lines.len() - 1)
        } else {
            (case * 7) % lines.len()
        };
        let earlier = lines[0].split('"').nth(3);
        let bad = mutate(lines[at], kind, earlier);
        let file: Vec<&str> = lines[..at]
            .iter()
            .copied()
            .chain([bad.as_str()])
            .chain(lines[at + 1..].iter().copied())
            .collect();
        let err = parse_jsonl(file.join("\n").as_bytes(), DatasetKind::Gold)
            .expect_err(&format!("case {case} (mutation {kind}) accepted: {bad}"));
        assert_eq!(err.line(), Some(at + 1), "case {case}: {err}");
        assert!(err.to_string().starts_with(&format!("line {}: ", at + 1)));
        rejected += 1;
    }
    assert_eq!(rejected, 100);
}

#[test]
fn unlabelled_kind_accepts_null_labels_only_there() {
    let line = r#"{"id":"u","speech_id":"s","speaker":null,"label":null,"tokens":[{"text":"hi","dep":"root"}]}"#;
    assert!(parse_jsonl(line.as_bytes(), DatasetKind::Unlabelled).is_ok());
    assert_eq!(
        parse_jsonl(line.as_bytes(), DatasetKind::Weak)
            .unwrap_err()
            .line(),
        Some(1)
    );
}

#[test]
fn vector_files_reload_identically() {
    let d = load_jsonl(fixture("gold.jsonl"), DatasetKind::Gold)
        .unwrap()
        .dataset;
    let vocab = build_vocabulary(&[&d], 1).unwrap();
    let table = random_table(vocab.len(), 5, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("v.txt");
    let side = dir.path().join("v.vec");
    write_text(std::fs::File::create(&text).unwrap(), &vocab, &table).unwrap();
    write_sidecar(std::fs::File::create(&side).unwrap(), &vocab, &table).unwrap();
    for p in [&text, &side] {
        let v = read_vectors(p).unwrap();
        assert_eq!(v.dim, 5);
        let words: Vec<&String> = v.entries.iter().map(|e| &e.0).collect();
        assert_eq!(words, vocab.words().iter().collect::<Vec<_>>());
        let flat: Vec<f64> = v.entries.into_iter().flat_map(|e| e.1).collect();
        assert_eq!(flat, table.as_slice());
    }
}
