//! Sentences, datasets and the structures fitted on them.
//!
//! Tokens arrive already tokenized and dependency-parsed: this crate never
//! segments or tags raw text.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::rng_for;
use crate::{Error, Result};

/// Reserved vocabulary and tag entry for unseen items.
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub norm: String,
    pub dep: String,
}

impl Token {
    pub fn new(text: impl Into<String>, dep: impl Into<String>) -> Result<Self, String> {
        let text = text.into();
        let dep = dep.into();
        if text.is_empty() {
            return Err("token text is empty".into());
        }
        if dep.is_empty() {
            return Err(alloc::format!("token `{text}` has an empty dependency tag"));
        }
        let norm = text.to_lowercase();
        Ok(Self { text, norm, dep })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub speech_id: String,
    pub speaker: Option<String>,
    pub tokens: Vec<Token>,
    pub label: Option<f64>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Label or 0 when the sentence is unlabelled.
    pub fn label_or_zero(&self) -> f64 {
        self.label.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Binary human annotations.
    Gold,
    /// Continuous labels in [0, 1] produced by an external scorer.
    Weak,
    /// Embedding-training text; labels optional.
    Unlabelled,
}

impl DatasetKind {
    /// Checks one sentence's label against this kind.
    pub fn validate_label(self, sentence: &Sentence) -> Result<()> {
        match sentence.label {
            None if self == DatasetKind::Unlabelled => Ok(()),
            None => Err(Error::MissingLabel(sentence.id.clone())),
            Some(label) => {
                if !(0.0..=1.0).contains(&label) {
                    return Err(Error::LabelOutOfRange {
                        id: sentence.id.clone(),
                        label,
                    });
                }
                if self == DatasetKind::Gold && label != 0.0 && label != 1.0 {
                    return Err(Error::NonBinaryGold {
                        id: sentence.id.clone(),
                        label,
                    });
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    kind: DatasetKind,
    sentences: Vec<Sentence>,
}

impl Dataset {
    pub fn new(kind: DatasetKind, sentences: Vec<Sentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = BTreeSet::new();
        for s in &sentences {
            validate_sentence(s)?;
            kind.validate_label(s)?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { kind, sentences })
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.sentences
    }

    /// Distinct speech ids in lexicographic order.
    pub fn speech_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self
            .sentences
            .iter()
            .map(|s| s.speech_id.as_str())
            .collect();
        ids.into_iter().map(ToString::to_string).collect()
    }
}

/// Structural checks shared by every dataset kind.
pub fn validate_sentence(s: &Sentence) -> Result<()> {
    if s.tokens.is_empty() {
        return Err(Error::EmptySentence(s.id.clone()));
    }
    for t in &s.tokens {
        let problem = if t.text.is_empty() {
            Some("token text is empty".to_string())
        } else if t.dep.is_empty() {
            Some(alloc::format!(
                "token `{}` has an empty dependency tag",
                t.text
            ))
        } else if t.norm != t.text.to_lowercase() {
            Some(alloc::format!(
                "token `{}` has a stale normalized form",
                t.text
            ))
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(Error::InvalidToken {
                id: s.id.clone(),
                message,
            });
        }
    }
    Ok(())
}

/// Word index over lowercased forms. Index 0 is always [`UNK`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    min_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    min_count: usize,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Self::from_words(r.words, r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            words: v.words,
            min_count: v.min_count,
        }
    }
}

impl Vocabulary {
    pub const UNK_INDEX: usize = 0;

    /// Rebuilds a vocabulary from its ordered word list (UNK first).
    pub fn from_words(words: Vec<String>, min_count: usize) -> Result<Self> {
        if words.first().map(String::as_str) != Some(UNK) {
            return Err(Error::InvalidConfig(
                "vocabulary must start with the UNK entry".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "duplicate vocabulary word `{w}`"
                )));
            }
        }
        Ok(Self {
            words,
            index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, norm: &str) -> Option<usize> {
        self.index.get(norm).copied()
    }

    /// Index of `norm`, falling back to UNK.
    pub fn lookup(&self, norm: &str) -> usize {
        self.get(norm).unwrap_or(Self::UNK_INDEX)
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }
}

/// Builds the vocabulary over the lowercased forms of all datasets.
///
/// Order: UNK, then words by descending frequency, ties lexicographic.
pub fn build_vocabulary(datasets: &[&Dataset], min_count: usize) -> Result<Vocabulary> {
    if datasets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if min_count == 0 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in datasets {
        for s in d.sentences() {
            for t in &s.tokens {
                *counts.entry(t.norm.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(w, c)| c >= min_count && w != UNK)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    // BTreeMap iteration is already lexicographic; a stable sort keeps it for ties.
    kept.sort_by_key(|&(_, c)| core::cmp::Reverse(c));
    let mut words = Vec::with_capacity(kept.len() + 1);
    words.push(UNK.to_string());
    words.extend(kept.into_iter().map(|(w, _)| w.to_string()));
    Vocabulary::from_words(words, min_count)
}

/// Closed set of dependency tags. Index 0 is the unseen-tag entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct DepTagSet {
    tags: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TryFrom<Vec<String>> for DepTagSet {
    type Error = Error;

    fn try_from(tags: Vec<String>) -> Result<Self> {
        Self::from_tags(tags)
    }
}

impl From<DepTagSet> for Vec<String> {
    fn from(t: DepTagSet) -> Self {
        t.tags
    }
}

impl DepTagSet {
    pub const UNK_INDEX: usize = 0;

    /// Fits the tag set on every tag seen in `datasets`, sorted lexicographically.
    pub fn fit(datasets: &[&Dataset]) -> Self {
        let seen: BTreeSet<&str> = datasets
            .iter()
            .flat_map(|d| d.sentences())
            .flat_map(|s| s.tokens.iter().map(|t| t.dep.as_str()))
            .filter(|&t| t != UNK)
            .collect();
        let mut tags = Vec::with_capacity(seen.len() + 1);
        tags.push(UNK.to_string());
        tags.extend(seen.into_iter().map(ToString::to_string));
        Self::from_tags(tags).expect("fitted tags are unique")
    }

    pub fn from_tags(tags: Vec<String>) -> Result<Self> {
        if tags.first().map(String::as_str) != Some(UNK) {
            return Err(Error::InvalidConfig(
                "tag set must start with the UNK entry".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "duplicate dependency tag `{t}`"
                )));
            }
        }
        Ok(Self { tags, index })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn lookup(&self, tag: &str) -> usize {
        self.index.get(tag).copied().unwrap_or(Self::UNK_INDEX)
    }
}

/// Sentence indices (into the dataset) for one fold and repetition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_speech: String,
    pub train_speeches: Vec<String>,
    /// One split per repetition; `test` is identical across repetitions.
    pub splits: Vec<Split>,
}

/// Leave-one-speech-out folds with repeated random validation draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub validation_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn num_folds(&self) -> usize {
        self.folds.len()
    }
}

/// One fold per speech. Validation sentences are drawn uniformly without
/// replacement from the fold's training sentences, independently for each
/// repetition.
pub fn build_fold_plan(
    dataset: &Dataset,
    validation_fraction: f64,
    repetitions: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "validation fraction {validation_fraction} outside (0, 1)"
        )));
    }
    if repetitions == 0 {
        return Err(Error::InvalidConfig(
            "repetitions must be at least 1".into(),
        ));
    }
    let speeches = dataset.speech_ids();
    if speeches.len() < 2 {
        return Err(Error::TooFewSpeeches(speeches.len()));
    }
    let mut folds = Vec::with_capacity(speeches.len());
    for (fold_index, test_speech) in speeches.iter().enumerate() {
        let (test, pool): (Vec<usize>, Vec<usize>) =
            (0..dataset.len()).partition(|&i| &dataset.sentences()[i].speech_id == test_speech);
        let n = pool.len();
        let n_valid = (crate::math::round(validation_fraction * n as f64) as usize)
            .clamp(1, n.saturating_sub(1).max(1));
        let splits = (0..repetitions)
            .map(|rep| {
                let mut rng = rng_for(seed, "validation", &[fold_index as u64, rep as u64]);
                let mut chosen: Vec<usize> = index::sample(&mut rng, n, n_valid).into_vec();
                chosen.sort_unstable();
                let mut is_valid = alloc::vec![false; n];
                for &c in &chosen {
                    is_valid[c] = true;
                }
                Split {
                    train: (0..n).filter(|&i| !is_valid[i]).map(|i| pool[i]).collect(),
                    valid: chosen.iter().map(|&c| pool[c]).collect(),
                    test: test.clone(),
                }
            })
            .collect();
        folds.push(Fold {
            test_speech: test_speech.clone(),
            train_speeches: speeches
                .iter()
                .filter(|s| *s != test_speech)
                .cloned()
                .collect(),
            splits,
        });
    }
    Ok(FoldPlan {
        folds,
        validation_fraction,
        repetitions,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub documents: usize,
    pub sentences: usize,
    pub mean_length: f64,
    pub unique_words: usize,
    /// `None` when no sentence carries a label.
    pub mean_label: Option<f64>,
}

pub fn dataset_stats(dataset: &Dataset) -> Result<DatasetStats> {
    let sentences = dataset.sentences();
    if sentences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tokens: usize = sentences.iter().map(Sentence::len).sum();
    let unique: BTreeSet<&str> = sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.norm.as_str()))
        .collect();
    let labels: Vec<f64> = sentences.iter().filter_map(|s| s.label).collect();
    Ok(DatasetStats {
        documents: dataset.speech_ids().len(),
        sentences: sentences.len(),
        mean_length: tokens as f64 / sentences.len() as f64,
        unique_words: unique.len(),
        mean_label: (!labels.is_empty()).then(|| crate::math::mean(&labels)),
    })
}

/// Per-speaker label histogram with `bins` equal-width bins over [0, 1].
/// Label 1.0 falls in the last bin. Sentences without a speaker are grouped
/// under their speech id.
pub fn label_histogram(dataset: &Dataset, bins: usize) -> BTreeMap<String, Vec<usize>> {
    let bins = bins.max(1);
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for s in dataset.sentences() {
        let Some(label) = s.label else { continue };
        let key = s.speaker.clone().unwrap_or_else(|| s.speech_id.clone());
        let bin = ((label * bins as f64) as usize).min(bins - 1);
        out.entry(key).or_insert_with(|| alloc::vec![0; bins])[bin] += 1;
    }
    out
}
