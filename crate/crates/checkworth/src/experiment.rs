//! Glue between files on disk and the core pipeline.

use std::path::PathBuf;
use std::str::FromStr;

use checkworth_core::corpus::{build_vocabulary, Dataset, DatasetKind, DepTagSet};
use checkworth_core::embedding::{
    import_vectors, random_table, train_skipgram, Provenance, SkipGramConfig,
};
use checkworth_core::encoder::EncoderConfig;
use checkworth_core::eval::EvalReport;
use checkworth_core::pipeline::{FoldRun, Pipeline, Resources};
use checkworth_core::rng::derive_seed;
use checkworth_core::weaksup::{weak_fraction_sweep, SweepConfig, SweepTable};
use checkworth_core::Result as CoreResult;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::word2vec::{read_vectors, VectorsError};

/// Where the embedding block of the encoder comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingSource {
    /// Skip-gram trained on every loaded sentence.
    Train,
    /// Small uniform random initialization.
    Random,
    /// No embedding block.
    None,
    /// Vectors read from a file (any layout of [`crate::word2vec`]).
    File(PathBuf),
}

impl FromStr for EmbeddingSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "train" => EmbeddingSource::Train,
            "random" => EmbeddingSource::Random,
            "none" => EmbeddingSource::None,
            path => EmbeddingSource::File(path.into()),
        })
    }
}

impl std::fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbeddingSource::Train => f.write_str("train"),
            EmbeddingSource::Random => f.write_str("random"),
            EmbeddingSource::None => f.write_str("none"),
            EmbeddingSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl EmbeddingSource {
    pub fn provenance(&self) -> Provenance {
        match self {
            EmbeddingSource::Train => Provenance::Trained,
            EmbeddingSource::Random => Provenance::Random,
            EmbeddingSource::None => Provenance::None,
            EmbeddingSource::File(_) => Provenance::Imported,
        }
    }

    pub fn encoder(&self, use_dep: bool, trainable: bool) -> EncoderConfig {
        EncoderConfig {
            use_embeddings: *self != EmbeddingSource::None,
            use_dep_onehot: use_dep,
            embedding_source: self.provenance(),
            trainable_embeddings: trainable,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ResourceError {
    #[error(transparent)]
    Core(#[from] checkworth_core::Error),
    #[error("{path}: {source}")]
    Vectors { path: String, source: VectorsError },
    #[error("{0}: no vocabulary word has a vector in this file")]
    NoOverlap(String),
}

#[derive(Debug, Clone)]
pub struct ResourceOptions {
    pub source: EmbeddingSource,
    /// Width of trained and random tables; imported tables keep their own.
    pub dim: usize,
    pub min_count: usize,
    pub seed: u64,
    pub skipgram: SkipGramConfig,
}

/// Vocabulary and tag set fitted on `datasets`, plus the embedding table
/// named by `options.source`. Returns human-readable notes alongside.
pub fn build_resources(
    datasets: &[&Dataset],
    options: &ResourceOptions,
) -> Result<(Resources, Vec<String>), ResourceError> {
    let vocab = build_vocabulary(datasets, options.min_count)?;
    let tags = DepTagSet::fit(datasets);
    let mut notes = vec![format!(
        "vocabulary of {} words, {} dependency tags",
        vocab.len(),
        tags.len()
    )];
    let embeddings = match &options.source {
        EmbeddingSource::None => None,
        EmbeddingSource::Random => Some(random_table(
            vocab.len(),
            options.dim,
            derive_seed(options.seed, "random-embeddings", &[]),
        )?),
        EmbeddingSource::Train => {
            let corpus = merged_with_unique_ids(datasets)?;
            let config = SkipGramConfig {
                dim: options.dim,
                seed: derive_seed(options.seed, "skipgram", &[]),
                ..options.skipgram.clone()
            };
            let outcome = train_skipgram(&corpus, &vocab, &config)?;
            if let Some(l) = outcome.epoch_losses.last() {
                notes.push(format!("skip-gram final epoch loss {l:.4}"));
            }
            Some(outcome.table)
        }
        EmbeddingSource::File(path) => {
            let shown = path.display().to_string();
            let vectors = read_vectors(path).map_err(|source| ResourceError::Vectors {
                path: shown.clone(),
                source,
            })?;
            let outcome = import_vectors(
                vectors.entries,
                &vocab,
                vectors.dim,
                derive_seed(options.seed, "import-embeddings", &[]),
            )?;
            if outcome.no_overlap() {
                return Err(ResourceError::NoOverlap(shown));
            }
            notes.push(format!(
                "imported {} of {} vocabulary vectors from {shown}",
                outcome.copied,
                vocab.len()
            ));
            Some(outcome.table)
        }
    };
    Ok((
        Resources {
            vocab,
            tags,
            embeddings,
        },
        notes,
    ))
}

/// Concatenation of `datasets` with ids made unique by a dataset prefix.
pub fn merged_with_unique_ids(datasets: &[&Dataset]) -> CoreResult<Dataset> {
    let sentences = datasets
        .iter()
        .enumerate()
        .flat_map(|(i, d)| {
            d.sentences().iter().map(move |s| {
                let mut s = s.clone();
                s.id = format!("{i}:{}", s.id);
                s
            })
        })
        .collect();
    Dataset::new(DatasetKind::Unlabelled, sentences)
}

/// Runs every fold, on `pool` when given, and aggregates in fold order.
pub fn run_folds(
    pipeline: &Pipeline,
    weak_subset: &[usize],
    pool: Option<&ThreadPool>,
) -> CoreResult<EvalReport> {
    let folds: Vec<usize> = (0..pipeline.plan().num_folds()).collect();
    let runs: CoreResult<Vec<FoldRun>> = match pool {
        Some(pool) => pool.install(|| {
            folds
                .par_iter()
                .map(|&f| pipeline.run_fold(f, weak_subset))
                .collect()
        }),
        None => folds
            .iter()
            .map(|&f| pipeline.run_fold(f, weak_subset))
            .collect(),
    };
    pipeline.report(runs?)
}

pub fn run_sweep(
    pipeline: &Pipeline,
    config: &SweepConfig,
    pool: Option<&ThreadPool>,
) -> CoreResult<SweepTable> {
    weak_fraction_sweep(pipeline.weak_len(), config, |subset| {
        run_folds(pipeline, subset, pool)
    })
}

/// A pool of `jobs` threads, or `None` for single-threaded execution.
pub fn thread_pool(jobs: usize) -> Result<Option<ThreadPool>, rayon::ThreadPoolBuildError> {
    if jobs <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map(Some)
}
