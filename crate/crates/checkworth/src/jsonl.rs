//! The JSONL sentence format shared with the preprocessor.
//!
//! One object per line:
//! `{"id": str, "speech_id": str, "speaker": str|null, "label": float|null, "tokens": [{"text": str, "dep": str}, ...]}`.
//! Unknown keys are accepted with a warning; everything else that deviates
//! from the schema is rejected with the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use checkworth_core::corpus::{validate_sentence, Dataset, DatasetKind, Sentence, Token};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] checkworth_core::Error),
}

impl JsonlError {
    pub fn line(&self) -> Option<usize> {
        match self {
            JsonlError::Line { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// A non-fatal schema deviation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub warnings: Vec<Warning>,
}

#[derive(Deserialize)]
struct RawToken {
    text: String,
    dep: String,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawSentence {
    id: String,
    speech_id: String,
    #[serde(default)]
    speaker: Option<String>,
    #[serde(default)]
    label: Option<f64>,
    tokens: Vec<RawToken>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize)]
struct OutToken<'a> {
    text: &'a str,
    dep: &'a str,
}

#[derive(Serialize)]
struct OutSentence<'a> {
    id: &'a str,
    speech_id: &'a str,
    speaker: Option<&'a str>,
    label: Option<f64>,
    tokens: Vec<OutToken<'a>>,
}

/// Parses and validates one line. Returns the sentence and any warnings.
pub fn parse_line(line: &str, kind: DatasetKind) -> Result<(Sentence, Vec<String>), String> {
    let raw: RawSentence = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut warnings = Vec::new();
    for key in raw.extra.keys() {
        warnings.push(format!("ignoring unknown key `{key}`"));
    }
    let mut tokens = Vec::with_capacity(raw.tokens.len());
    for (i, t) in raw.tokens.into_iter().enumerate() {
        for key in t.extra.keys() {
            warnings.push(format!("token {i}: ignoring unknown key `{key}`"));
        }
        tokens.push(Token::new(t.text, t.dep).map_err(|m| format!("token {i}: {m}"))?);
    }
    if raw.id.is_empty() || raw.speech_id.is_empty() {
        return Err("`id` and `speech_id` must be non-empty".into());
    }
    let sentence = Sentence {
        id: raw.id,
        speech_id: raw.speech_id,
        speaker: raw.speaker,
        tokens,
        label: raw.label,
    };
    validate_sentence(&sentence).map_err(|e| e.to_string())?;
    kind.validate_label(&sentence).map_err(|e| e.to_string())?;
    Ok((sentence, warnings))
}

/// Reads a whole JSONL stream. Line numbers start at 1.
pub fn parse_jsonl(reader: impl BufRead, kind: DatasetKind) -> Result<Loaded, JsonlError> {
    let mut sentences = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let n = i + 1;
        let bytes = line.map_err(|e| JsonlError::Io {
            path: "<input>".into(),
            source: e,
        })?;
        let mut text = String::from_utf8(bytes).map_err(|_| JsonlError::Line {
            line: n,
            message: "invalid UTF-8".into(),
        })?;
        if text.ends_with('\r') {
            text.pop();
            warnings.push(Warning {
                line: n,
                message: "CRLF line ending".into(),
            });
        }
        if text.trim().is_empty() {
            continue;
        }
        let (sentence, line_warnings) =
            parse_line(&text, kind).map_err(|message| JsonlError::Line { line: n, message })?;
        if let Some(first) = seen.insert(sentence.id.clone(), n) {
            return Err(JsonlError::Line {
                line: n,
                message: format!("duplicate id `{}` (first on line {first})", sentence.id),
            });
        }
        warnings.extend(
            line_warnings
                .into_iter()
                .map(|message| Warning { line: n, message }),
        );
        sentences.push(sentence);
    }
    Ok(Loaded {
        dataset: Dataset::new(kind, sentences)?,
        warnings,
    })
}

pub fn load_jsonl(path: impl AsRef<Path>, kind: DatasetKind) -> Result<Loaded, JsonlError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| JsonlError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_jsonl(BufReader::new(file), kind)
}

/// Canonical single-line encoding with keys in schema order.
pub fn sentence_to_json(sentence: &Sentence) -> String {
    let out = OutSentence {
        id: &sentence.id,
        speech_id: &sentence.speech_id,
        speaker: sentence.speaker.as_deref(),
        label: sentence.label,
        tokens: sentence
            .tokens
            .iter()
            .map(|t| OutToken {
                text: &t.text,
                dep: &t.dep,
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("sentences serialize")
}

pub fn write_jsonl(mut w: impl Write, sentences: &[Sentence]) -> io::Result<()> {
    for s in sentences {
        writeln!(w, "{}", sentence_to_json(s))?;
    }
    Ok(())
}

pub fn to_jsonl_string(sentences: &[Sentence]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, sentences).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}
