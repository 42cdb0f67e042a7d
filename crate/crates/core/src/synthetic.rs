//! Seeded benchmark with known signal in both input channels.
//!
//! Each sentence is filler words with filler dependency tags. One random
//! slot per sentence may carry a cue word (seen only by the embedding
//! channel) and, independently, a cue tag (seen only by the dependency
//! channel). The gold label is drawn from `P(y = 1 | word cue, tag cue)`;
//! weak labels add bounded uniform noise to a label drawn the same way.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, Dataset, DatasetKind, DepTagSet, Sentence, Token};
use crate::embedding::{EmbeddingTable, Provenance};
use crate::network::TrainConfig;
use crate::pipeline::Resources;
use crate::rng::{rng_for, ChaCha8Rng};
use crate::{Error, Result};

pub const CUE_WORD: &str = "cueword";
pub const CUE_TAG: &str = "cuetag";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub speeches: usize,
    pub sentences_per_speech: usize,
    pub weak_sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub filler_words: usize,
    pub filler_tags: usize,
    pub word_cue_rate: f64,
    pub tag_cue_rate: f64,
    /// `P(y = 1)` indexed by `[word cue][tag cue]`.
    pub positive_rate: [[f64; 2]; 2],
    /// Weak labels are `clamp(y + U(-noise, noise), 0, 1)`.
    pub weak_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            speeches: 7,
            sentences_per_speech: 40,
            weak_sentences: 500,
            min_len: 5,
            max_len: 10,
            filler_words: 30,
            filler_tags: 6,
            word_cue_rate: 0.35,
            tag_cue_rate: 0.35,
            positive_rate: [[0.02, 0.35], [0.55, 0.97]],
            weak_noise: 0.45,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synthetic benchmark: {m}")));
        if self.speeches < 2 || self.sentences_per_speech == 0 {
            return bad("needs at least two non-empty speeches");
        }
        if self.min_len < 2 || self.max_len < self.min_len {
            return bad("sentence lengths must satisfy 2 <= min_len <= max_len");
        }
        if self.filler_words == 0 || self.filler_tags == 0 {
            return bad("needs filler words and tags");
        }
        let rates = [self.word_cue_rate, self.tag_cue_rate, self.weak_noise];
        if rates
            .iter()
            .chain(self.positive_rate.iter().flatten())
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Training settings sized for the default benchmark.
pub fn benchmark_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 16,
        max_epochs: 60,
        patience: 10,
        hidden_size: 8,
        ..TrainConfig::default()
    }
}

/// Embedding width used with [`benchmark_train_config`].
pub const BENCHMARK_EMBEDDING_DIM: usize = 8;

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub gold: Dataset,
    pub weak: Dataset,
    pub config: SyntheticConfig,
}

fn generate_sentence(
    config: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
    id: String,
    speech: String,
) -> (Sentence, f64) {
    let len = rng.gen_range(config.min_len..=config.max_len);
    let mut tokens: Vec<Token> = (0..len)
        .map(|_| {
            let w = rng.gen_range(0..config.filler_words);
            let t = rng.gen_range(0..config.filler_tags);
            Token::new(format!("w{w}"), format!("t{t}")).expect("generated tokens are valid")
        })
        .collect();
    let word_cue = rng.gen_bool(config.word_cue_rate);
    let tag_cue = rng.gen_bool(config.tag_cue_rate);
    let slot = rng.gen_range(0..len);
    if word_cue {
        tokens[slot].text = CUE_WORD.into();
        tokens[slot].norm = CUE_WORD.into();
    }
    if tag_cue {
        tokens[slot].dep = CUE_TAG.into();
    }
    let p = config.positive_rate[word_cue as usize][tag_cue as usize];
    let y = if rng.gen_bool(p) { 1.0 } else { 0.0 };
    (
        Sentence {
            id,
            speech_id: speech,
            speaker: None,
            tokens,
            label: Some(y),
        },
        y,
    )
}

impl SyntheticBenchmark {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(config.seed, "synthetic-gold", &[]);
        let mut gold = Vec::with_capacity(config.speeches * config.sentences_per_speech);
        for sp in 0..config.speeches {
            for i in 0..config.sentences_per_speech {
                gold.push(
                    generate_sentence(
                        config,
                        &mut rng,
                        format!("g{sp}-{i:03}"),
                        format!("speech{sp}"),
                    )
                    .0,
                );
            }
        }
        let mut rng = rng_for(config.seed, "synthetic-weak", &[]);
        let mut weak = Vec::with_capacity(config.weak_sentences);
        for i in 0..config.weak_sentences {
            let (mut s, y) = generate_sentence(config, &mut rng, format!("w{i:04}"), "weak".into());
            let noise = if config.weak_noise > 0.0 {
                rng.gen_range(-config.weak_noise..=config.weak_noise)
            } else {
                0.0
            };
            s.label = Some((y + noise).clamp(0.0, 1.0));
            weak.push(s);
        }
        Ok(Self {
            gold: Dataset::new(DatasetKind::Gold, gold)?,
            weak: Dataset::new(DatasetKind::Weak, weak)?,
            config: config.clone(),
        })
    }

    /// Vocabulary and tag set over both datasets, with a `U[-1, 1]`
    /// embedding table of width `dim`.
    pub fn resources(&self, dim: usize) -> Result<Resources> {
        let vocab = build_vocabulary(&[&self.gold, &self.weak], 1)?;
        let tags = DepTagSet::fit(&[&self.gold, &self.weak]);
        let mut rng = rng_for(self.config.seed, "synthetic-embeddings", &[]);
        let data = (0..vocab.len() * dim)
            .map(|_| rng.gen_range(-1.0..=1.0))
            .collect();
        Ok(Resources {
            vocab,
            tags,
            embeddings: Some(EmbeddingTable::new(dim, data, Provenance::Random)?),
        })
    }
}
