//! Dependency tag overlap statistics and attention explanations.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, DatasetKind, DepTagSet, Sentence, Vocabulary};
use crate::encoder::{encode, EncoderConfig};
use crate::math::{mean, sample_std};
use crate::network::Model;
use crate::rng::rng_for;
use crate::{Error, Result};

/// The distinct dependency tags of a sentence.
pub fn unique_tags(sentence: &Sentence) -> BTreeSet<&str> {
    sentence.tokens.iter().map(|t| t.dep.as_str()).collect()
}

/// Number of dependency tag types the two sentences share.
pub fn pair_overlap(a: &Sentence, b: &Sentence) -> usize {
    unique_tags(a).intersection(&unique_tags(b)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapGroup {
    Checkworthy,
    NonCheckworthy,
    Mixed,
}

impl OverlapGroup {
    pub const ALL: [OverlapGroup; 3] = [
        OverlapGroup::Checkworthy,
        OverlapGroup::NonCheckworthy,
        OverlapGroup::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OverlapGroup::Checkworthy => "checkworthy",
            OverlapGroup::NonCheckworthy => "non_checkworthy",
            OverlapGroup::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapConfig {
    /// Sentence pairs per trial.
    pub n: usize,
    pub trials: usize,
    /// Positive cut for weakly labelled data; gold data uses label = 1.
    pub positive_threshold: f64,
    pub seed: u64,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            n: 10,
            trials: 1000,
            positive_threshold: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub group: OverlapGroup,
    pub mean_overlap: f64,
    /// Sample standard deviation of the per-trial means.
    pub std_overlap: f64,
}

/// Per-sentence tag sets as sorted tag indices.
fn tag_sets(sentences: &[&Sentence]) -> Vec<Vec<usize>> {
    let mut names: Vec<&str> = sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.dep.as_str()))
        .collect();
    names.sort_unstable();
    names.dedup();
    sentences
        .iter()
        .map(|s| {
            let mut ids: Vec<usize> = s
                .tokens
                .iter()
                .map(|t| {
                    names
                        .binary_search(&t.dep.as_str())
                        .expect("tag collected above")
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect()
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Average tag overlap of random sentence pairs within the check-worthy
/// class, within the other class, and across the two.
///
/// Each trial draws `n` pairs independently. A within-class pair is two
/// distinct sentences; a mixed pair takes one from each class. Trial `i`
/// of group `g` uses its own generator, so results do not depend on the
/// order trials run in.
pub fn overlap_experiment(dataset: &Dataset, config: &OverlapConfig) -> Result<[OverlapResult; 3]> {
    if config.n == 0 || config.trials == 0 {
        return Err(Error::InvalidConfig(
            "overlap needs n >= 1 and trials >= 1".into(),
        ));
    }
    let positive = |s: &Sentence| -> Result<bool> {
        let label = s.label.ok_or_else(|| Error::MissingLabel(s.id.clone()))?;
        Ok(match dataset.kind() {
            DatasetKind::Weak => label >= config.positive_threshold,
            _ => label == 1.0,
        })
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for s in dataset.sentences() {
        if positive(s)? {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    let needed = config.n.max(2);
    for (group, found) in [("checkworthy", pos.len()), ("non_checkworthy", neg.len())] {
        if found < needed {
            return Err(Error::InsufficientPopulation {
                group,
                found,
                needed,
            });
        }
    }
    let all: Vec<&Sentence> = pos.iter().chain(&neg).copied().collect();
    let all_sets = tag_sets(&all);
    let (pos_sets, neg_sets) = all_sets.split_at(pos.len());

    let mut out = [OverlapResult {
        group: OverlapGroup::Checkworthy,
        mean_overlap: 0.0,
        std_overlap: 0.0,
    }; 3];
    for (gi, group) in OverlapGroup::ALL.into_iter().enumerate() {
        let trial_means: Vec<f64> = (0..config.trials)
            .map(|trial| {
                let mut rng = rng_for(config.seed, "overlap", &[gi as u64, trial as u64]);
                let total: usize = (0..config.n)
                    .map(|_| match group {
                        OverlapGroup::Checkworthy => within(pos_sets, &mut rng),
                        OverlapGroup::NonCheckworthy => within(neg_sets, &mut rng),
                        OverlapGroup::Mixed => {
                            let a = rng.gen_range(0..pos_sets.len());
                            let b = rng.gen_range(0..neg_sets.len());
                            sorted_intersection(&pos_sets[a], &neg_sets[b])
                        }
                    })
                    .sum();
                total as f64 / config.n as f64
            })
            .collect();
        out[gi] = OverlapResult {
            group,
            mean_overlap: mean(&trial_means),
            std_overlap: sample_std(&trial_means),
        };
    }
    Ok(out)
}

fn within<R: Rng>(sets: &[Vec<usize>], rng: &mut R) -> usize {
    let pair = sample(rng, sets.len(), 2);
    sorted_intersection(&sets[pair.index(0)], &sets[pair.index(1)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub text: String,
    pub alpha: f64,
}

/// A scored sentence with the attention weight of each surface token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub score: f64,
    pub label: Option<f64>,
    pub tokens: Vec<TokenWeight>,
}

/// Scores `sentence` and aligns the attention weights to its tokens.
pub fn explain(
    sentence: &Sentence,
    model: &Model,
    vocab: &Vocabulary,
    tags: &DepTagSet,
    encoder: &EncoderConfig,
) -> Result<Explanation> {
    let table = model.embeddings.as_ref();
    let encoded = match (encoder.use_embeddings, table) {
        (true, Some(t)) => encode(sentence, vocab, Some(t), tags, encoder)?,
        (true, None) => {
            return Err(Error::EncoderMismatch(
                "the encoder uses embeddings but the model carries no table".into(),
            ))
        }
        (false, _) => encode(sentence, vocab, None, tags, encoder)?,
    };
    if encoded.width != model.params.shape.input_size {
        return Err(Error::EncoderMismatch(alloc::format!(
            "encoder produces width {} but the model expects {}",
            encoded.width,
            model.params.shape.input_size
        )));
    }
    let prediction = model.predict(&encoded)?;
    Ok(Explanation {
        id: sentence.id.clone(),
        score: prediction.score,
        label: sentence.label,
        tokens: sentence
            .tokens
            .iter()
            .zip(prediction.attention)
            .map(|(t, alpha)| TokenWeight {
                text: t.text.clone(),
                alpha,
            })
            .collect(),
    })
}

/// Number of highlight levels in terminal output.
pub const SHADE_BUCKETS: usize = 8;

/// `alpha` relative to the sentence maximum, in `[0, 1]`.
pub fn relative_weight(alpha: f64, max_alpha: f64) -> f64 {
    if max_alpha > 0.0 {
        (alpha / max_alpha).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Highlight level `0..buckets` of a token; the maximal weight always maps
/// to the deepest level.
pub fn shade_bucket(alpha: f64, max_alpha: f64, buckets: usize) -> usize {
    let b = buckets.max(1);
    let level = (relative_weight(alpha, max_alpha) * b as f64) as usize;
    level.min(b - 1)
}

impl Explanation {
    pub fn max_alpha(&self) -> f64 {
        self.tokens.iter().map(|t| t.alpha).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::sentence;
    use crate::corpus::{build_vocabulary, Token};
    use crate::embedding::random_table;
    use crate::network::{ModelParams, ModelShape};
    use alloc::format;
    use alloc::vec;

    #[test]
    fn pair_overlap_counts_types() {
        let a = sentence(
            "a",
            "s",
            &[
                ("I", "nsubj"),
                ("saw", "root"),
                ("it", "dobj"),
                ("you", "nsubj"),
            ],
            None,
        );
        assert_eq!(pair_overlap(&a, &a), 3);
        let b = sentence("b", "s", &[("x", "amod"), ("y", "det")], None);
        assert_eq!(pair_overlap(&a, &b), 0);
        let c = sentence("c", "s", &[("x", "nsubj"), ("y", "det")], None);
        assert_eq!(pair_overlap(&a, &c), pair_overlap(&c, &a));
        assert_eq!(pair_overlap(&a, &c), 1);
    }

    /// Every positive carries tags t0..t6 plus one private tag; every
    /// negative carries n0 plus one private tag, except that the 20
    /// negatives split evenly between sharing t0 and not.
    fn engineered() -> Dataset {
        let mut out = Vec::new();
        for i in 0..20 {
            let mut toks: Vec<(String, String)> =
                (0..7).map(|t| (format!("w{t}"), format!("t{t}"))).collect();
            toks.push(("p".into(), format!("pos{i}")));
            let refs: Vec<(&str, &str)> =
                toks.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            out.push(sentence(&format!("p{i}"), "s", &refs, Some(1.0)));
        }
        for i in 0..20 {
            let private = format!("neg{i}");
            let mut toks = vec![("w", "n0"), ("q", private.as_str())];
            if i % 2 == 0 {
                toks.push(("z", "t0"));
            }
            out.push(sentence(&format!("n{i}"), "s", &toks, Some(0.0)));
        }
        Dataset::new(DatasetKind::Gold, out).unwrap()
    }

    #[test]
    fn engineered_expectations() {
        let cfg = OverlapConfig {
            trials: 300,
            ..Default::default()
        };
        let [pos, neg, mixed] = overlap_experiment(&engineered(), &cfg).unwrap();
        assert_eq!(pos.mean_overlap, 7.0);
        assert_eq!(pos.std_overlap, 0.0);
        // 1 for n0, plus t0 when both were drawn from the even half: P = 9/38.
        assert!((neg.mean_overlap - (1.0 + 9.0 / 38.0)).abs() < 0.05);
        assert!((mixed.mean_overlap - 0.5).abs() < 0.05);
    }

    #[test]
    fn overlap_is_reproducible_and_checks_population() {
        let d = engineered();
        let cfg = OverlapConfig {
            trials: 50,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(
            overlap_experiment(&d, &cfg).unwrap(),
            overlap_experiment(&d, &cfg).unwrap()
        );
        let big = OverlapConfig { n: 25, ..cfg };
        assert!(matches!(
            overlap_experiment(&d, &big),
            Err(Error::InsufficientPopulation { needed: 25, .. })
        ));
    }

    #[test]
    fn explanation_and_shading() {
        let s = sentence("x", "s", &[("taxes", "nsubj"), ("rose", "root")], Some(1.0));
        let d = Dataset::new(DatasetKind::Gold, vec![s.clone()]).unwrap();
        let vocab = build_vocabulary(&[&d], 1).unwrap();
        let tags = DepTagSet::fit(&[&d]);
        let enc = EncoderConfig::default();
        let table = random_table(vocab.len(), 3, 0).unwrap();
        let shape = ModelShape::with_ratio(enc.width(3, tags.len()), 4);
        let params = ModelParams::init(shape, &mut rng_for(0, "t", &[])).unwrap();
        let model = Model::new(params, Some(table));
        let e = explain(&s, &model, &vocab, &tags, &enc).unwrap();
        assert_eq!(e.tokens.len(), 2);
        assert!((e.tokens.iter().map(|t| t.alpha).sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(e.score > 0.0 && e.score < 1.0);

        let one = Sentence {
            tokens: vec![Token::new("alone", "root").unwrap()],
            ..s.clone()
        };
        assert_eq!(
            explain(&one, &model, &vocab, &tags, &enc).unwrap().tokens[0].alpha,
            1.0
        );

        let no_dep = EncoderConfig {
            use_dep_onehot: false,
            ..enc
        };
        assert!(matches!(
            explain(&s, &model, &vocab, &tags, &no_dep),
            Err(Error::EncoderMismatch(_))
        ));

        assert_eq!(shade_bucket(0.75, 0.75, SHADE_BUCKETS), SHADE_BUCKETS - 1);
        assert_eq!(shade_bucket(0.25, 0.75, SHADE_BUCKETS), 2);
        assert_eq!(
            shade_bucket(0.5, 0.5, SHADE_BUCKETS),
            shade_bucket(0.5, 0.5, SHADE_BUCKETS)
        );
        assert_eq!(shade_bucket(0.0, 0.0, SHADE_BUCKETS), 0);
    }
}
