use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{accumulate, Gradients, Model};
use super::optimizer::RmsProp;
use super::params::{AttentionKind, ModelParams, ModelShape};
use crate::embedding::EmbeddingTable;
use crate::encoder::EncodedSentence;
use crate::eval::{average_precision, RankedItem, RankedList};
use crate::rng::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub hidden_sizes: Vec<usize>,
    pub batch_sizes: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            hidden_sizes: alloc::vec![50, 100, 200, 400],
            batch_sizes: alloc::vec![64, 128, 256, 512],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub seed: u64,
    pub hidden_size: usize,
    /// Defaults to a quarter of `hidden_size`.
    pub dense_size: Option<usize>,
    pub attention: AttentionKind,
    pub grid: Grid,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            seed: 0,
            hidden_size: 100,
            dense_size: None,
            attention: AttentionKind::Affine,
            grid: Grid::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.learning_rate)
            || !(0.0..1.0).contains(&self.rmsprop_decay)
            || !positive(self.rmsprop_epsilon)
        {
            return Err(Error::InvalidConfig("invalid optimizer settings".into()));
        }
        Ok(())
    }

    pub fn shape(&self, input_size: usize) -> ModelShape {
        ModelShape {
            input_size,
            hidden_size: self.hidden_size,
            dense_size: self.dense_size.unwrap_or((self.hidden_size / 4).max(1)),
            attention: self.attention,
        }
    }
}

/// A training or validation sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    /// Ranking group (the speech) used for validation MAP.
    pub group: String,
    pub encoded: EncodedSentence,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Validation MAP of the starting parameters.
    pub initial_valid_map: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch beat the starting parameters.
    pub best_epoch: usize,
    pub best_valid_map: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainingLog,
}

pub enum ModelInit {
    /// Fresh Glorot initialization from the config seed. A table given
    /// here is fine-tuned along with the network.
    Fresh { embeddings: Option<EmbeddingTable> },
    /// Continue from existing parameters (fine-tuning after pretraining).
    From(Box<Model>),
}

/// Mean over groups of the AP of each group's ranking. Labels >= 0.5 count
/// as relevant.
pub fn validation_map(model: &Model, examples: &[Example]) -> Result<f64> {
    let mut groups: BTreeMap<&str, Vec<RankedItem>> = BTreeMap::new();
    for ex in examples {
        let score = model.predict(&ex.encoded)?.score;
        groups
            .entry(ex.group.as_str())
            .or_default()
            .push(RankedItem {
                id: ex.id.clone(),
                score,
                relevant: ex.label >= 0.5,
            });
    }
    if groups.is_empty() {
        return Ok(0.0);
    }
    let count = groups.len() as f64;
    let total: f64 = groups
        .into_values()
        .map(|items| average_precision(&RankedList::new(items)))
        .sum();
    Ok(total / count)
}

/// Mean BCE of `model` over `examples`.
pub fn mean_loss(model: &Model, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in examples {
        total += super::model::loss(model.predict(&ex.encoded)?.score, ex.label);
    }
    Ok(total / examples.len() as f64)
}

/// Mini-batch RMSprop on BCE with early stopping on validation MAP.
///
/// Each epoch visits the training set in a seeded random order. A batch
/// gradient is the mean of per-sentence gradients. The parameters with the
/// best validation MAP seen so far (the starting point included) are
/// returned; training stops after `patience` epochs without a strict
/// improvement or after `max_epochs`.
pub fn train(
    train: &[Example],
    valid: &[Example],
    config: &TrainConfig,
    init: ModelInit,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidConfig(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let width = train[0].encoded.width;
    let mut model = match init {
        ModelInit::Fresh { embeddings } => {
            let mut rng = rng_for(config.seed, "init", &[]);
            Model::new(
                ModelParams::init(config.shape(width), &mut rng)?,
                embeddings,
            )
        }
        ModelInit::From(model) => *model,
    };
    for ex in train.iter().chain(valid) {
        if ex.encoded.width != model.params.shape.input_size {
            return Err(Error::WidthMismatch {
                expected: model.params.shape.input_size,
                found: ex.encoded.width,
            });
        }
        if !(0.0..=1.0).contains(&ex.label) {
            return Err(Error::LabelOutOfRange {
                id: ex.id.clone(),
                label: ex.label,
            });
        }
    }

    let initial_valid_map = validation_map(&model, valid)?;
    let mut log = TrainingLog {
        initial_valid_map,
        epochs: Vec::new(),
        best_epoch: 0,
        best_valid_map: initial_valid_map,
        stopped_early: false,
    };
    let mut best = model.clone();
    let mut optimizer = RmsProp::new(
        &model.params,
        config.learning_rate,
        config.rmsprop_decay,
        config.rmsprop_epsilon,
    );
    let mut grads = Gradients::zeros_like(&model.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(config.seed, "shuffle", &[epoch as u64]));
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.reset();
            for &i in batch {
                let ex = &train[i];
                let rows = model.inputs(&ex.encoded);
                loss_sum += accumulate(&ex.encoded, &rows, &model.params, ex.label, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut model.params, &grads, model.embeddings.as_mut());
        }
        let train_loss = loss_sum / train.len() as f64;
        if !train_loss.is_finite() || !model.params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        let valid_map = validation_map(&model, valid)?;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            valid_map,
        });
        if valid_map > log.best_valid_map {
            log.best_valid_map = valid_map;
            log.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    Ok(TrainOutcome { model: best, log })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hidden_size: usize,
    pub batch_size: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub best: TrainConfig,
    pub points: Vec<GridPoint>,
}

/// Scores every (hidden size, batch size) pair of `base.grid` with
/// `evaluate` (typically mean validation MAP) and returns the best config.
/// The dense layer follows the 4:1 ratio. Ties go to the smaller hidden
/// size, then the smaller batch size.
pub fn grid_search<F>(base: &TrainConfig, mut evaluate: F) -> Result<GridSearchOutcome>
where
    F: FnMut(&TrainConfig) -> Result<f64>,
{
    let mut hidden = base.grid.hidden_sizes.clone();
    let mut batches = base.grid.batch_sizes.clone();
    hidden.sort_unstable();
    hidden.dedup();
    batches.sort_unstable();
    batches.dedup();
    if hidden.is_empty() || batches.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    let mut points = Vec::with_capacity(hidden.len() * batches.len());
    let mut best: Option<(f64, TrainConfig)> = None;
    for &h in &hidden {
        for &b in &batches {
            let config = TrainConfig {
                hidden_size: h,
                dense_size: None,
                batch_size: b,
                ..base.clone()
            };
            let score = evaluate(&config)?;
            points.push(GridPoint {
                hidden_size: h,
                batch_size: b,
                score,
            });
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, config));
            }
        }
    }
    Ok(GridSearchOutcome {
        best: best.expect("grid is non-empty").1,
        points,
    })
}
