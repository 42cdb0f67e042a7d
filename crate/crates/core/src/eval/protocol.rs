use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::{query_metrics, Metric, MetricVector, QueryMetrics, RankedItem, RankedList};
use super::ttest::{paired_ttest, TTest};
use crate::corpus::{Dataset, FoldPlan, Split};
use crate::{Error, Result};

/// How fold results become one number per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Each test speech is one query; metrics are averaged over folds.
    #[default]
    PerQuery,
    /// All test sentences of a repetition are ranked together as one list.
    Pooled,
}

/// Test-sentence scores produced by a pipeline: `(sentence id, score)`.
pub type Scores = Vec<(String, f64)>;

#[derive(Debug, Clone, Copy)]
pub struct ProtocolTask<'a> {
    pub fold: usize,
    pub repetition: usize,
    pub test_speech: &'a str,
    pub split: &'a Split,
}

impl FoldPlan {
    /// Every (fold, repetition) task in fold-major order.
    pub fn tasks(&self) -> Vec<ProtocolTask<'_>> {
        self.folds
            .iter()
            .enumerate()
            .flat_map(|(f, fold)| {
                fold.splits
                    .iter()
                    .enumerate()
                    .map(move |(r, split)| ProtocolTask {
                        fold: f,
                        repetition: r,
                        test_speech: &fold.test_speech,
                        split,
                    })
            })
            .collect()
    }
}

/// Metrics of one test speech, ranked by `scores`.
pub fn evaluate_fold(gold: &[(String, bool)], scores: &[(String, f64)]) -> Result<QueryMetrics> {
    let lookup: BTreeMap<&str, f64> = scores.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    let items = gold
        .iter()
        .map(|(id, relevant)| {
            let score = *lookup
                .get(id.as_str())
                .ok_or_else(|| Error::Unscored(id.clone()))?;
            Ok(RankedItem {
                id: id.clone(),
                score,
                relevant: *relevant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(query_metrics(&RankedList::new(items)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub fold: usize,
    pub repetition: usize,
    pub query: String,
    pub metrics: MetricVector,
    pub positives: usize,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Name of the report compared against.
    pub baseline: String,
    /// Keyed by metric name.
    pub tests: BTreeMap<String, TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub averaging: Averaging,
    pub folds: usize,
    pub repetitions: usize,
    pub per_query: Vec<QueryRecord>,
    pub per_repetition_means: Vec<MetricVector>,
    pub grand_means: MetricVector,
    pub significance: Option<Significance>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Per-repetition series for one metric, the input to the t-test.
    pub fn series(&self, metric: Metric) -> Vec<f64> {
        self.per_repetition_means
            .iter()
            .map(|m| m.get(metric))
            .collect()
    }

    /// Paired two-tailed t-tests of this report against `baseline` on the
    /// per-repetition means of every metric.
    pub fn compare(&self, baseline: &EvalReport, name: &str) -> Result<Significance> {
        let mut tests = BTreeMap::new();
        for m in Metric::ALL {
            tests.insert(
                m.name().into(),
                paired_ttest(&self.series(m), &baseline.series(m))?,
            );
        }
        Ok(Significance {
            baseline: name.into(),
            tests,
        })
    }
}

fn gold_of(dataset: &Dataset, indices: &[usize]) -> Vec<(String, bool)> {
    indices
        .iter()
        .map(|&i| {
            let s = &dataset.sentences()[i];
            (s.id.clone(), s.label_or_zero() >= 0.5)
        })
        .collect()
}

/// Folds results of every task into a report. `results` must hold one
/// entry per task of `plan`, in any order.
pub fn aggregate(
    dataset: &Dataset,
    plan: &FoldPlan,
    averaging: Averaging,
    results: Vec<((usize, usize), Scores)>,
) -> Result<EvalReport> {
    let mut by_task: BTreeMap<(usize, usize), Scores> = results.into_iter().collect();
    let mut per_query = Vec::new();
    let mut warnings = Vec::new();
    let mut per_repetition_means = Vec::with_capacity(plan.repetitions);
    for rep in 0..plan.repetitions {
        let mut fold_metrics = Vec::with_capacity(plan.num_folds());
        let mut pooled_gold = Vec::new();
        let mut pooled_scores = Vec::new();
        for (f, fold) in plan.folds.iter().enumerate() {
            let scores = by_task.remove(&(f, rep)).ok_or_else(|| {
                Error::InvalidConfig(format!("missing result for fold {f}, repetition {rep}"))
            })?;
            let gold = gold_of(dataset, &fold.splits[rep].test);
            let q = evaluate_fold(&gold, &scores)?;
            if q.no_positives && rep == 0 {
                warnings.push(format!(
                    "fold {f} (speech `{}`) has no check-worthy sentences; its metrics are 0",
                    fold.test_speech
                ));
            }
            per_query.push(QueryRecord {
                fold: f,
                repetition: rep,
                query: fold.test_speech.clone(),
                metrics: q.metrics,
                positives: q.positives,
                items: q.items,
            });
            fold_metrics.push(q.metrics);
            if averaging == Averaging::Pooled {
                pooled_gold.extend(gold);
                pooled_scores.extend(scores);
            }
        }
        per_repetition_means.push(match averaging {
            Averaging::PerQuery => MetricVector::mean(&fold_metrics),
            Averaging::Pooled => evaluate_fold(&pooled_gold, &pooled_scores)?.metrics,
        });
    }
    let grand_means = MetricVector::mean(&per_repetition_means);
    Ok(EvalReport {
        averaging,
        folds: plan.num_folds(),
        repetitions: plan.repetitions,
        per_query,
        per_repetition_means,
        grand_means,
        significance: None,
        warnings,
    })
}

/// Runs `pipeline` on every fold and repetition and aggregates the test
/// scores. The pipeline returns a score for every test sentence.
pub fn run_protocol<F>(
    dataset: &Dataset,
    plan: &FoldPlan,
    averaging: Averaging,
    mut pipeline: F,
) -> Result<EvalReport>
where
    F: FnMut(&ProtocolTask<'_>) -> Result<Scores>,
{
    let mut results = Vec::new();
    for task in plan.tasks() {
        results.push(((task.fold, task.repetition), pipeline(&task)?));
    }
    aggregate(dataset, plan, averaging, results)
}
