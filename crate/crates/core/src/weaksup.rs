//! Weak label thresholding, pretraining on weak data followed by gold
//! fine-tuning, and the weak-data fraction sweep.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingTable;
use crate::eval::{EvalReport, Metric, MetricVector};
use crate::math::round;
use crate::network::{train, Example, ModelInit, TrainConfig, TrainOutcome, TrainingLog};
use crate::rng::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauChoice {
    pub tau: f64,
    /// Fraction of labels `>= tau`.
    pub fraction: f64,
    /// `|fraction - target|`.
    pub error: f64,
}

/// Fraction of `labels` at or above `tau`.
pub fn fraction_at_or_above(labels: &[f64], tau: f64) -> f64 {
    labels.iter().filter(|&&l| l >= tau).count() as f64 / labels.len() as f64
}

/// The label value whose at-or-above fraction is closest to `target`.
/// Ties prefer the larger fraction, i.e. the smaller threshold.
pub fn find_tau(labels: &[f64], target: f64) -> Result<TauChoice> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidConfig(alloc::format!(
            "target fraction {target} outside [0, 1]"
        )));
    }
    let mut sorted = labels.to_vec();
    if sorted.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("weak labels"));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut best: Option<TauChoice> = None;
    let mut i = 0;
    while i < sorted.len() {
        let tau = sorted[i];
        let fraction = (sorted.len() - i) as f64 / n;
        let error = (fraction - target).abs();
        // Ascending scan: an equal error later has a smaller fraction, so keep the first.
        if best.is_none_or(|b| error < b.error) {
            best = Some(TauChoice {
                tau,
                fraction,
                error,
            });
        }
        while i < sorted.len() && sorted[i] == tau {
            i += 1;
        }
    }
    Ok(best.expect("non-empty labels"))
}

/// `l >= tau` becomes 1, everything else 0.
pub fn binarize(labels: &[f64], tau: f64) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l >= tau { 1.0 } else { 0.0 })
        .collect()
}

/// `l -> min(l, tau) / tau`.
pub fn truncate_scale(labels: &[f64], tau: f64) -> Vec<f64> {
    labels.iter().map(|&l| l.min(tau) / tau).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Binarize,
    #[default]
    TruncateScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub tau: f64,
    pub mode: ThresholdMode,
}

impl ThresholdConfig {
    pub fn new(tau: f64, mode: ThresholdMode) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "threshold {tau} outside (0, 1]"
            )));
        }
        Ok(Self { tau, mode })
    }

    pub fn apply(&self, labels: &[f64]) -> Vec<f64> {
        match self.mode {
            ThresholdMode::Binarize => binarize(labels, self.tau),
            ThresholdMode::TruncateScale => truncate_scale(labels, self.tau),
        }
    }
}

/// Fraction of examples with label >= 0.5.
pub fn positive_fraction(examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples.iter().filter(|e| e.label >= 0.5).count() as f64 / examples.len() as f64
}

/// Chooses τ for `weak` against the positive fraction of a fold's gold
/// training portion.
pub fn fold_threshold(
    weak: &[Example],
    gold_training: &[Example],
    mode: ThresholdMode,
) -> Result<ThresholdConfig> {
    let labels: Vec<f64> = weak.iter().map(|e| e.label).collect();
    let choice = find_tau(&labels, positive_fraction(gold_training))?;
    ThresholdConfig::new(choice.tau, mode)
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub finetuned: TrainOutcome,
    /// Absent when the weak set was empty.
    pub pretrain_log: Option<TrainingLog>,
    pub threshold: Option<ThresholdConfig>,
}

/// Trains from scratch on thresholded weak labels, then fine-tunes on
/// gold data. Both stages select on `gold_valid`. An empty `weak` reduces
/// to plain training with `finetune`.
pub fn pretrain_finetune(
    weak: &[Example],
    gold_train: &[Example],
    gold_valid: &[Example],
    threshold: ThresholdConfig,
    pretrain: &TrainConfig,
    finetune: &TrainConfig,
    embeddings: Option<EmbeddingTable>,
) -> Result<PretrainOutcome> {
    if weak.is_empty() {
        return Ok(PretrainOutcome {
            finetuned: train(
                gold_train,
                gold_valid,
                finetune,
                ModelInit::Fresh { embeddings },
            )?,
            pretrain_log: None,
            threshold: None,
        });
    }
    let raw: Vec<f64> = weak.iter().map(|e| e.label).collect();
    let transformed: Vec<Example> = weak
        .iter()
        .zip(threshold.apply(&raw))
        .map(|(e, label)| Example { label, ..e.clone() })
        .collect();
    let pretrained = train(
        &transformed,
        gold_valid,
        pretrain,
        ModelInit::Fresh { embeddings },
    )?;
    let finetuned = train(
        gold_train,
        gold_valid,
        finetune,
        ModelInit::From(Box::new(pretrained.model)),
    )?;
    Ok(PretrainOutcome {
        finetuned,
        pretrain_log: Some(pretrained.log),
        threshold: Some(threshold),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: (0..=10).map(|i| i as f64 / 10.0).collect(),
            resamples: 5,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.resamples == 0 {
            return Err(Error::InvalidConfig(
                "a sweep needs fractions and at least one resample".into(),
            ));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidConfig(alloc::format!(
                "sweep fraction {f} outside [0, 1]"
            )));
        }
        Ok(())
    }
}

/// One sweep run: grand means of the full protocol for one weak subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub repetition: usize,
    pub metrics: MetricVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Mean over resamples for each fraction, in sweep order.
    pub fn means(&self) -> Vec<(f64, MetricVector)> {
        let mut out: Vec<(f64, Vec<MetricVector>)> = Vec::new();
        for row in &self.rows {
            match out.iter_mut().find(|(f, _)| *f == row.fraction) {
                Some((_, v)) => v.push(row.metrics),
                None => out.push((row.fraction, alloc::vec![row.metrics])),
            }
        }
        out.into_iter()
            .map(|(f, v)| (f, MetricVector::mean(&v)))
            .collect()
    }

    pub fn mean_at(&self, fraction: f64, metric: Metric) -> Option<f64> {
        self.means()
            .into_iter()
            .find(|(f, _)| *f == fraction)
            .map(|(_, m)| m.get(metric))
    }
}

/// Indices of the weak subset for one sweep cell: `round(fraction * n)`
/// elements drawn uniformly without replacement, sorted.
pub fn sweep_subset(
    n: usize,
    fraction: f64,
    fraction_index: usize,
    resample: usize,
    seed: u64,
) -> Vec<usize> {
    let k = (round(fraction * n as f64) as usize).min(n);
    let mut rng = rng_for(seed, "sweep", &[fraction_index as u64, resample as u64]);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// All `(fraction index, resample, subset)` cells of a sweep.
pub fn sweep_cells(n: usize, config: &SweepConfig) -> Result<Vec<(usize, usize, Vec<usize>)>> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.fractions.len() * config.resamples);
    for (fi, &f) in config.fractions.iter().enumerate() {
        for r in 0..config.resamples {
            cells.push((fi, r, sweep_subset(n, f, fi, r, config.seed)));
        }
    }
    Ok(cells)
}

/// Runs the full protocol for every cell of the sweep. `run` receives the
/// indices of the weak subset to pretrain on and is called once per
/// distinct subset; cells with equal subsets (every resample at fractions
/// 0 and 1) share the result.
pub fn weak_fraction_sweep<F>(
    weak_len: usize,
    config: &SweepConfig,
    mut run: F,
) -> Result<SweepTable>
where
    F: FnMut(&[usize]) -> Result<EvalReport>,
{
    let mut rows = Vec::new();
    let mut done: BTreeMap<Vec<usize>, MetricVector> = BTreeMap::new();
    for (fi, r, subset) in sweep_cells(weak_len, config)? {
        let metrics = match done.get(&subset) {
            Some(m) => *m,
            None => {
                let m = run(&subset)?.grand_means;
                done.insert(subset, m);
                m
            }
        };
        rows.push(SweepRow {
            fraction: config.fractions[fi],
            repetition: r,
            metrics,
        });
    }
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tau_examples() {
        let t = find_tau(&[0.1, 0.2, 0.6, 0.9], 0.5).unwrap();
        assert_eq!(t.tau, 0.6);
        assert_eq!(t.fraction, 0.5);
        assert_eq!(t.error, 0.0);

        assert_eq!(find_tau(&[0.4, 0.2, 0.7], 1.0).unwrap().tau, 0.2);
        let same = find_tau(&[0.3, 0.3, 0.3], 0.1).unwrap();
        assert_eq!((same.tau, same.fraction), (0.3, 1.0));
        assert_eq!(find_tau(&[], 0.5).unwrap_err(), Error::EmptyLabels);
    }

    #[test]
    fn tau_ties_prefer_larger_fraction() {
        // Fractions 1.0, 0.75, 0.5, 0.25; target 0.625 sits between 0.75 and 0.5.
        let t = find_tau(&[0.1, 0.2, 0.3, 0.4], 0.625).unwrap();
        assert_eq!(t.tau, 0.2);
        assert_eq!(t.fraction, 0.75);
    }

    #[test]
    fn transforms() {
        assert_eq!(binarize(&[0.3, 0.7], 0.5), vec![0.0, 1.0]);
        assert_eq!(binarize(&[0.5], 0.5), vec![1.0]);
        assert_eq!(binarize(&[0.1, 0.2], 0.5), vec![0.0, 0.0]);
        assert_eq!(truncate_scale(&[0.8, 0.25, 0.0], 0.5), vec![1.0, 0.5, 0.0]);
        assert!(ThresholdConfig::new(0.0, ThresholdMode::Binarize).is_err());
        let c = ThresholdConfig::new(0.4, ThresholdMode::TruncateScale).unwrap();
        assert!(c.apply(&[0.1, 0.2]).iter().all(|&l| l > 0.0 && l < 1.0));
    }

    #[test]
    fn sweep_subsets() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.fractions.len(), 11);
        let cells = sweep_cells(20, &cfg).unwrap();
        assert_eq!(cells.len(), 55);
        for (fi, _, s) in &cells {
            assert_eq!(s.len(), (*fi as f64 * 2.0) as usize);
        }
        assert_eq!(
            sweep_subset(20, 0.5, 5, 1, 3),
            sweep_subset(20, 0.5, 5, 1, 3)
        );
        assert_ne!(
            sweep_subset(20, 0.5, 5, 1, 3),
            sweep_subset(20, 0.5, 5, 2, 3)
        );
        assert_eq!(sweep_subset(20, 1.0, 10, 0, 3), (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn sweep_table_means() {
        let cfg = SweepConfig {
            fractions: vec![0.0, 1.0],
            resamples: 3,
            seed: 1,
        };
        let mut calls = 0;
        let table = weak_fraction_sweep(10, &cfg, |subset| {
            calls += 1;
            let map = subset.len() as f64 / 10.0;
            Ok(EvalReport {
                averaging: Default::default(),
                folds: 1,
                repetitions: 1,
                per_query: vec![],
                per_repetition_means: vec![],
                grand_means: MetricVector {
                    map,
                    ..Default::default()
                },
                significance: None,
                warnings: vec![],
            })
        })
        .unwrap();
        assert_eq!(calls, 2);
        assert_eq!(table.rows.len(), 6);
        assert_eq!(table.means().len(), 2);
        assert_eq!(table.mean_at(0.0, Metric::Map), Some(0.0));
        assert_eq!(table.mean_at(1.0, Metric::Map), Some(1.0));
    }
}
