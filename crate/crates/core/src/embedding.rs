//! Word embedding tables and skip-gram training with negative sampling.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Vocabulary};
use crate::math::{dot, ln, powf, sigmoid, sqrt};
use crate::rng::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Trained,
    Imported,
    Random,
    None,
}

/// Dense `rows x dim` matrix of word vectors, row `i` belonging to
/// vocabulary index `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    rows: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

impl EmbeddingTable {
    pub fn new(dim: usize, data: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "embedding dimension must be positive".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding table"));
        }
        Ok(Self {
            dim,
            rows: data.len() / dim,
            data,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Uniform entries in `[-0.5/dim, 0.5/dim]`, the word2vec initialization.
pub fn random_table(rows: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "embedding dimension must be positive".into(),
        ));
    }
    let mut rng = rng_for(seed, "embedding-init", &[]);
    let bound = 0.5 / dim as f64;
    let data = (0..rows * dim)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    EmbeddingTable::new(dim, data, Provenance::Random)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub window: usize,
    pub negatives_per_word: usize,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial one (linear decay).
    pub min_learning_rate_fraction: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample_threshold: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            window: 5,
            negatives_per_word: 25,
            dim: 300,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate_fraction: 1e-4,
            subsample_threshold: 1e-3,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.negatives_per_word == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "window, negatives_per_word and dim must all be at least 1".into(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(
                "skip-gram learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Negative-sampling loss for one (center, context, negatives) triple:
/// `-ln s(u_o . v_c) - sum_k ln s(-u_k . v_c)`.
pub fn negative_sampling_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = -ln(sigmoid(dot(context, center)));
    for neg in negatives {
        loss -= ln(sigmoid(-dot(neg, center)));
    }
    loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSamplingGrad {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient of [`negative_sampling_loss`].
pub fn negative_sampling_grad(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> NegativeSamplingGrad {
    let dim = center.len();
    let mut d_center = vec![0.0; dim];
    // dL/ds for the positive pair is sigma(s) - 1, for a negative sigma(s).
    let g = sigmoid(dot(context, center)) - 1.0;
    for i in 0..dim {
        d_center[i] += g * context[i];
    }
    let d_context = center.iter().map(|c| g * c).collect();
    let mut d_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let g = sigmoid(dot(neg, center));
        for i in 0..dim {
            d_center[i] += g * neg[i];
        }
        d_negs.push(center.iter().map(|c| g * c).collect());
    }
    NegativeSamplingGrad {
        center: d_center,
        context: d_context,
        negatives: d_negs,
    }
}

/// Cumulative unigram^(3/4) distribution sampled by binary search.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += powf(c as f64, 0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty noise table");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramOutcome {
    pub table: EmbeddingTable,
    /// Mean loss per (center, context) pair for each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains input vectors with skip-gram negative sampling. Single-threaded
/// and fully determined by `config.seed`. Words missing from `vocab` train
/// the UNK row.
pub fn train_skipgram(
    corpus: &Dataset,
    vocab: &Vocabulary,
    config: &SkipGramConfig,
) -> Result<SkipGramOutcome> {
    config.validate()?;
    let dim = config.dim;
    let mut input = random_table(vocab.len(), dim, config.seed)?;
    let mut output = vec![0.0; vocab.len() * dim];

    let sentences: Vec<Vec<usize>> = corpus
        .sentences()
        .iter()
        .map(|s| s.tokens.iter().map(|t| vocab.lookup(&t.norm)).collect())
        .collect();
    let mut counts = vec![0usize; vocab.len()];
    for s in &sentences {
        for &w in s {
            counts[w] += 1;
        }
    }
    let total_words: usize = counts.iter().sum();
    if total_words == 0 || config.epochs == 0 {
        return Ok(SkipGramOutcome {
            table: retag(input, Provenance::Trained)?,
            epoch_losses: Vec::new(),
        });
    }
    let keep_prob: Vec<f64> = counts
        .iter()
        .map(|&c| {
            let t = config.subsample_threshold * total_words as f64;
            if config.subsample_threshold <= 0.0 || c == 0 {
                1.0
            } else {
                let f = c as f64;
                ((sqrt(f / t) + 1.0) * t / f).min(1.0)
            }
        })
        .collect();
    let noise = NoiseTable::new(&counts);
    let mut rng = rng_for(config.seed, "skipgram", &[]);

    let planned = (config.epochs * total_words) as f64;
    let floor = config.learning_rate * config.min_learning_rate_fraction;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut center_grad = vec![0.0; dim];
    let mut kept = Vec::new();

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for sentence in &sentences {
            processed += sentence.len();
            let lr = (config.learning_rate * (1.0 - processed as f64 / (planned + 1.0))).max(floor);
            kept.clear();
            kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&w| rng.gen::<f64>() < keep_prob[w]),
            );
            for pos in 0..kept.len() {
                let reach = rng.gen_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                let center = kept[pos];
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos];
                    center_grad.iter_mut().for_each(|g| *g = 0.0);
                    let v = input.row(center).to_vec();
                    let mut pair_loss = 0.0;
                    for k in 0..=config.negatives_per_word {
                        let (target, positive) = if k == 0 {
                            (context, true)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, false)
                        };
                        let u = &mut output[target * dim..(target + 1) * dim];
                        let s = dot(u, &v);
                        let p = sigmoid(s);
                        pair_loss -= if positive {
                            ln(p.max(1e-300))
                        } else {
                            ln((1.0 - p).max(1e-300))
                        };
                        let d_score = if positive { p - 1.0 } else { p };
                        for i in 0..dim {
                            center_grad[i] += d_score * u[i];
                            u[i] -= lr * d_score * v[i];
                        }
                    }
                    for (x, g) in input.row_mut(center).iter_mut().zip(&center_grad) {
                        *x -= lr * g;
                    }
                    loss_sum += pair_loss;
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 {
            0.0
        } else {
            loss_sum / pairs as f64
        });
    }
    Ok(SkipGramOutcome {
        table: retag(input, Provenance::Trained)?,
        epoch_losses,
    })
}

fn retag(table: EmbeddingTable, provenance: Provenance) -> Result<EmbeddingTable> {
    EmbeddingTable::new(table.dim, table.data, provenance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportOutcome {
    pub table: EmbeddingTable,
    pub copied: usize,
    pub missing: usize,
}

impl ImportOutcome {
    /// True when no vocabulary word was found among the imported vectors.
    pub fn no_overlap(&self) -> bool {
        self.copied == 0
    }
}

/// Builds a table from externally trained `(word, vector)` entries.
///
/// Entries are matched on their lowercased form; the first entry wins when
/// several share one. Vocabulary rows without an entry keep the random
/// initialization of [`random_table`].
pub fn import_vectors<I>(
    entries: I,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<ImportOutcome>
where
    I: IntoIterator<Item = (String, Vec<f64>)>,
{
    let mut table = random_table(vocab.len(), dim, seed)?;
    let mut filled = vec![false; vocab.len()];
    for (word, vector) in entries {
        if vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: vector.len(),
            });
        }
        if let Some(i) = vocab.get(&word.to_lowercase()) {
            if !filled[i] {
                if vector.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("imported vector"));
                }
                table.row_mut(i).copy_from_slice(&vector);
                filled[i] = true;
            }
        }
    }
    let copied = filled.iter().filter(|&&f| f).count();
    Ok(ImportOutcome {
        table: retag(table, Provenance::Imported)?,
        copied,
        missing: vocab.len() - copied,
    })
}
