//! Runs one experiment configuration through the cross-validation protocol.
//!
//! [`Pipeline::run_fold`] is the unit of work; folds are independent and
//! can be executed in any order or in parallel, then combined with
//! [`eval::aggregate`](crate::eval::aggregate).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_fold_plan, Dataset, DepTagSet, FoldPlan, Sentence, Vocabulary};
use crate::embedding::EmbeddingTable;
use crate::encoder::{encode, EncoderConfig};
use crate::eval::{aggregate, Averaging, EvalReport, Scores};
use crate::math::round;
use crate::network::{
    grid_search, Example, GridPoint, Model, ModelInit, TrainConfig, TrainOutcome,
};
use crate::rng::{derive_seed, rng_for};
use crate::weaksup::{fold_threshold, pretrain_finetune, ThresholdMode};
use crate::{Error, Result};

/// Shared lookup tables for encoding.
#[derive(Debug, Clone)]
pub struct Resources {
    pub vocab: Vocabulary,
    pub tags: DepTagSet,
    pub embeddings: Option<EmbeddingTable>,
}

/// Weak-supervision arm. The pretraining stage takes its architecture
/// (hidden size, dense size, attention) from the fine-tuning config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakSetup {
    pub mode: ThresholdMode,
    pub pretrain: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub encoder: EncoderConfig,
    /// Its `seed` is ignored; per-task seeds derive from `seed` below.
    pub train: TrainConfig,
    pub weak: Option<WeakSetup>,
    pub grid_search: bool,
    pub averaging: Averaging,
    pub validation_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            weak: None,
            grid_search: false,
            averaging: Averaging::PerQuery,
            validation_fraction: 0.1,
            repetitions: 5,
            seed: 0,
        }
    }
}

/// Test scores of every repetition of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    pub fold: usize,
    pub scores: Vec<Scores>,
    pub valid_maps: Vec<f64>,
    pub hidden_size: usize,
    pub batch_size: usize,
    /// Empty unless grid search ran.
    pub grid: Vec<GridPoint>,
}

impl FoldRun {
    pub fn into_results(self) -> Vec<((usize, usize), Scores)> {
        let fold = self.fold;
        self.scores
            .into_iter()
            .enumerate()
            .map(|(rep, s)| ((fold, rep), s))
            .collect()
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    resources: Resources,
    gold: Dataset,
    plan: FoldPlan,
    gold_examples: Vec<Example>,
    weak_examples: Vec<Example>,
}

fn encode_all(
    sentences: &[Sentence],
    resources: &Resources,
    encoder: &EncoderConfig,
) -> Result<Vec<Example>> {
    let table = if encoder.use_embeddings {
        Some(resources.embeddings.as_ref().ok_or_else(|| {
            Error::EncoderMismatch("embeddings enabled but none were provided".into())
        })?)
    } else {
        None
    };
    sentences
        .iter()
        .map(|s| {
            Ok(Example {
                id: s.id.clone(),
                group: s.speech_id.clone(),
                encoded: encode(s, &resources.vocab, table, &resources.tags, encoder)?,
                label: s.label_or_zero(),
            })
        })
        .collect()
}

fn pick(examples: &[Example], indices: &[usize]) -> Vec<Example> {
    indices.iter().map(|&i| examples[i].clone()).collect()
}

impl Pipeline {
    pub fn new(
        gold: Dataset,
        weak: Option<&Dataset>,
        resources: Resources,
        config: PipelineConfig,
    ) -> Result<Self> {
        config.encoder.validate()?;
        config.train.validate()?;
        if let Some(w) = &config.weak {
            w.pretrain.validate()?;
        }
        let plan = build_fold_plan(
            &gold,
            config.validation_fraction,
            config.repetitions,
            config.seed,
        )?;
        let gold_examples = encode_all(gold.sentences(), &resources, &config.encoder)?;
        let weak_examples = match (weak, &config.weak) {
            (Some(w), Some(_)) => encode_all(w.sentences(), &resources, &config.encoder)?,
            _ => Vec::new(),
        };
        Ok(Self {
            config,
            resources,
            gold,
            plan,
            gold_examples,
            weak_examples,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn plan(&self) -> &FoldPlan {
        &self.plan
    }

    pub fn gold(&self) -> &Dataset {
        &self.gold
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }

    pub fn weak_len(&self) -> usize {
        self.weak_examples.len()
    }

    /// Every weak sentence; the subset used by a full weak-supervision run.
    pub fn all_weak(&self) -> Vec<usize> {
        (0..self.weak_examples.len()).collect()
    }

    fn fresh_embeddings(&self) -> Option<EmbeddingTable> {
        if self.config.encoder.use_embeddings && self.config.encoder.trainable_embeddings {
            self.resources.embeddings.clone()
        } else {
            None
        }
    }

    /// Trains on `train`/`valid`, pretraining on `weak` first when the
    /// weak arm is configured. `threshold_target` is the gold data whose
    /// positive fraction τ is matched against.
    fn fit(
        &self,
        train: &[Example],
        valid: &[Example],
        weak: &[Example],
        threshold_target: &[Example],
        config: &TrainConfig,
        pretrain_seed: u64,
    ) -> Result<TrainOutcome> {
        match &self.config.weak {
            Some(setup) if !weak.is_empty() => {
                let threshold = fold_threshold(weak, threshold_target, setup.mode)?;
                let pretrain = TrainConfig {
                    hidden_size: config.hidden_size,
                    dense_size: config.dense_size,
                    attention: config.attention,
                    seed: pretrain_seed,
                    ..setup.pretrain.clone()
                };
                Ok(pretrain_finetune(
                    weak,
                    train,
                    valid,
                    threshold,
                    &pretrain,
                    config,
                    self.fresh_embeddings(),
                )?
                .finetuned)
            }
            _ => crate::network::train(
                train,
                valid,
                config,
                ModelInit::Fresh {
                    embeddings: self.fresh_embeddings(),
                },
            ),
        }
    }

    fn run_repetition(
        &self,
        fold: usize,
        rep: usize,
        config: &TrainConfig,
        weak: &[Example],
    ) -> Result<(Scores, f64)> {
        let split = &self.plan.folds[fold].splits[rep];
        let path = [fold as u64, rep as u64];
        let config = TrainConfig {
            seed: derive_seed(self.config.seed, "train", &path),
            ..config.clone()
        };
        let train = pick(&self.gold_examples, &split.train);
        let valid = pick(&self.gold_examples, &split.valid);
        let portion: Vec<Example> = train.iter().chain(&valid).cloned().collect();
        let outcome = self.fit(
            &train,
            &valid,
            weak,
            &portion,
            &config,
            derive_seed(self.config.seed, "pretrain", &path),
        )?;
        let scores = score(&outcome.model, &self.gold_examples, &split.test)?;
        Ok((scores, outcome.log.best_valid_map))
    }

    /// All repetitions of one fold, with grid search over the configured
    /// grid when enabled (selecting on mean validation MAP).
    pub fn run_fold(&self, fold: usize, weak_subset: &[usize]) -> Result<FoldRun> {
        if fold >= self.plan.num_folds() {
            return Err(Error::InvalidConfig(alloc::format!("no fold {fold}")));
        }
        let weak = pick(&self.weak_examples, weak_subset);
        let run_all = |config: &TrainConfig| -> Result<(Vec<Scores>, Vec<f64>)> {
            let mut scores = Vec::with_capacity(self.plan.repetitions);
            let mut maps = Vec::with_capacity(self.plan.repetitions);
            for rep in 0..self.plan.repetitions {
                let (s, m) = self.run_repetition(fold, rep, config, &weak)?;
                scores.push(s);
                maps.push(m);
            }
            Ok((scores, maps))
        };
        if !self.config.grid_search {
            let (scores, valid_maps) = run_all(&self.config.train)?;
            return Ok(FoldRun {
                fold,
                scores,
                valid_maps,
                hidden_size: self.config.train.hidden_size,
                batch_size: self.config.train.batch_size,
                grid: Vec::new(),
            });
        }
        let mut cache: BTreeMap<(usize, usize), (Vec<Scores>, Vec<f64>)> = BTreeMap::new();
        let outcome = grid_search(&self.config.train, |config| {
            let (scores, maps) = run_all(config)?;
            let mean = maps.iter().sum::<f64>() / maps.len() as f64;
            cache.insert((config.hidden_size, config.batch_size), (scores, maps));
            Ok(mean)
        })?;
        let key = (outcome.best.hidden_size, outcome.best.batch_size);
        let (scores, valid_maps) = cache.remove(&key).expect("best grid point was evaluated");
        Ok(FoldRun {
            fold,
            scores,
            valid_maps,
            hidden_size: key.0,
            batch_size: key.1,
            grid: outcome.points,
        })
    }

    /// Combines fold runs (in any order) into a report.
    pub fn report(&self, runs: Vec<FoldRun>) -> Result<EvalReport> {
        let results = runs.into_iter().flat_map(FoldRun::into_results).collect();
        aggregate(&self.gold, &self.plan, self.config.averaging, results)
    }

    /// The full protocol, folds in order on the calling thread.
    pub fn evaluate(&self, weak_subset: &[usize]) -> Result<EvalReport> {
        let runs = (0..self.plan.num_folds())
            .map(|f| self.run_fold(f, weak_subset))
            .collect::<Result<Vec<_>>>()?;
        self.report(runs)
    }

    /// Trains one model on all gold data, holding out a random validation
    /// portion for early stopping.
    pub fn train_full(&self, weak_subset: &[usize]) -> Result<TrainOutcome> {
        let n = self.gold_examples.len();
        let n_valid = (round(self.config.validation_fraction * n as f64) as usize)
            .clamp(1, n.saturating_sub(1).max(1));
        let mut rng = rng_for(self.config.seed, "final-validation", &[]);
        let mut valid_idx = sample(&mut rng, n, n_valid).into_vec();
        valid_idx.sort_unstable();
        let train_idx: Vec<usize> = (0..n)
            .filter(|i| valid_idx.binary_search(i).is_err())
            .collect();
        let config = TrainConfig {
            seed: derive_seed(self.config.seed, "train", &[]),
            ..self.config.train.clone()
        };
        self.fit(
            &pick(&self.gold_examples, &train_idx),
            &pick(&self.gold_examples, &valid_idx),
            &pick(&self.weak_examples, weak_subset),
            &self.gold_examples,
            &config,
            derive_seed(self.config.seed, "pretrain", &[]),
        )
    }
}

/// Scores `examples[i]` for every `i` in `indices`.
pub fn score(model: &Model, examples: &[Example], indices: &[usize]) -> Result<Scores> {
    indices
        .iter()
        .map(|&i| {
            Ok((
                examples[i].id.clone(),
                model.predict(&examples[i].encoded)?.score,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Grid;
    use crate::synthetic::{SyntheticBenchmark, SyntheticConfig};

    fn small() -> SyntheticBenchmark {
        SyntheticBenchmark::generate(&SyntheticConfig {
            speeches: 3,
            sentences_per_speech: 12,
            weak_sentences: 30,
            ..Default::default()
        })
        .unwrap()
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            train: TrainConfig {
                max_epochs: 3,
                hidden_size: 4,
                batch_size: 8,
                learning_rate: 0.01,
                ..Default::default()
            },
            repetitions: 2,
            validation_fraction: 0.2,
            ..Default::default()
        }
    }

    #[test]
    fn evaluate_is_deterministic_and_parallel_safe() {
        let b = small();
        let p = Pipeline::new(b.gold.clone(), None, b.resources(8).unwrap(), config()).unwrap();
        let serial = p.evaluate(&[]).unwrap();
        let mut runs: Vec<FoldRun> = (0..p.plan().num_folds())
            .rev()
            .map(|f| p.run_fold(f, &[]).unwrap())
            .collect();
        runs.reverse();
        assert_eq!(p.report(runs).unwrap(), serial);
        assert_eq!(serial.per_query.len(), 6);
    }

    #[test]
    fn empty_weak_subset_equals_plain_training() {
        let b = small();
        let plain = Pipeline::new(b.gold.clone(), None, b.resources(8).unwrap(), config()).unwrap();
        let weak_cfg = PipelineConfig {
            weak: Some(WeakSetup {
                mode: ThresholdMode::TruncateScale,
                pretrain: config().train,
            }),
            ..config()
        };
        let weak = Pipeline::new(
            b.gold.clone(),
            Some(&b.weak),
            b.resources(8).unwrap(),
            weak_cfg,
        )
        .unwrap();
        assert_eq!(weak.weak_len(), 30);
        assert_eq!(weak.evaluate(&[]).unwrap(), plain.evaluate(&[]).unwrap());
        assert_ne!(
            weak.evaluate(&weak.all_weak()).unwrap(),
            plain.evaluate(&[]).unwrap()
        );
    }

    #[test]
    fn grid_search_records_points() {
        let b = small();
        let cfg = PipelineConfig {
            grid_search: true,
            train: TrainConfig {
                grid: Grid {
                    hidden_sizes: alloc::vec![4, 8],
                    batch_sizes: alloc::vec![8],
                },
                ..config().train
            },
            repetitions: 1,
            ..config()
        };
        let p = Pipeline::new(b.gold.clone(), None, b.resources(8).unwrap(), cfg).unwrap();
        let run = p.run_fold(0, &[]).unwrap();
        assert_eq!(run.grid.len(), 2);
        let best = run.grid.iter().map(|g| g.score).fold(f64::MIN, f64::max);
        let chosen = run
            .grid
            .iter()
            .find(|g| g.hidden_size == run.hidden_size)
            .unwrap();
        assert_eq!(chosen.score, best);
    }

    #[test]
    fn encoder_without_table_is_rejected() {
        let b = small();
        let mut r = b.resources(8).unwrap();
        r.embeddings = None;
        assert!(matches!(
            Pipeline::new(b.gold.clone(), None, r, config()),
            Err(Error::EncoderMismatch(_))
        ));
    }

    #[test]
    fn train_full_produces_a_model() {
        let b = small();
        let p = Pipeline::new(b.gold.clone(), None, b.resources(8).unwrap(), config()).unwrap();
        let out = p.train_full(&[]).unwrap();
        assert!(out.model.embeddings.is_some());
        assert!(out.log.epochs.len() <= 3);
    }
}
