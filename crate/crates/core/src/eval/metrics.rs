use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub id: String,
    pub score: f64,
    pub relevant: bool,
}

/// Items sorted by descending score; equal scores fall back to ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    items: Vec<RankedItem>,
}

impl RankedList {
    pub fn new(mut items: Vec<RankedItem>) -> Self {
        items.sort_by(|a, b| match b.score.total_cmp(&a.score) {
            Ordering::Equal => a.id.cmp(&b.id),
            other => other,
        });
        Self { items }
    }

    pub fn items(&self) -> &[RankedItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.items.iter().filter(|i| i.relevant).count()
    }
}

/// `(1/R) * sum over relevant ranks k of P@k`; 0 when nothing is relevant.
pub fn average_precision(ranked: &RankedList) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, item) in ranked.items.iter().enumerate() {
        if item.relevant {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Relevant items among the top `min(k, len)` divided by `k`. Returns 0 for `k = 0`.
pub fn precision_at(ranked: &RankedList, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.items.iter().take(k).filter(|i| i.relevant).count();
    hits as f64 / k as f64
}

/// The five reported ranking metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    #[serde(rename = "MAP")]
    pub map: f64,
    #[serde(rename = "P@5")]
    pub p5: f64,
    #[serde(rename = "P@10")]
    pub p10: f64,
    #[serde(rename = "P@20")]
    pub p20: f64,
    #[serde(rename = "P@R")]
    pub pr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Map,
    P5,
    P10,
    P20,
    PR,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Map,
        Metric::P5,
        Metric::P10,
        Metric::P20,
        Metric::PR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Map => "MAP",
            Metric::P5 => "P@5",
            Metric::P10 => "P@10",
            Metric::P20 => "P@20",
            Metric::PR => "P@R",
        }
    }
}

impl MetricVector {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Map => self.map,
            Metric::P5 => self.p5,
            Metric::P10 => self.p10,
            Metric::P20 => self.p20,
            Metric::PR => self.pr,
        }
    }

    fn set(&mut self, metric: Metric, value: f64) {
        match metric {
            Metric::Map => self.map = value,
            Metric::P5 => self.p5 = value,
            Metric::P10 => self.p10 = value,
            Metric::P20 => self.p20 = value,
            Metric::PR => self.pr = value,
        }
    }

    /// Componentwise mean; zero vector for an empty input.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a MetricVector>) -> MetricVector {
        let mut out = MetricVector::default();
        let mut n = 0usize;
        for v in vectors {
            n += 1;
            for m in Metric::ALL {
                out.set(m, out.get(m) + v.get(m));
            }
        }
        if n > 0 {
            for m in Metric::ALL {
                out.set(m, out.get(m) / n as f64);
            }
        }
        out
    }
}

/// All metrics for one query (one test speech).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub metrics: MetricVector,
    /// R: relevant items in the query.
    pub positives: usize,
    pub items: usize,
    /// Set when the query has no relevant item; every metric is then 0.
    pub no_positives: bool,
}

pub fn query_metrics(ranked: &RankedList) -> QueryMetrics {
    let r = ranked.positives();
    QueryMetrics {
        metrics: MetricVector {
            map: average_precision(ranked),
            p5: precision_at(ranked, 5),
            p10: precision_at(ranked, 10),
            p20: precision_at(ranked, 20),
            pr: precision_at(ranked, r),
        },
        positives: r,
        items: ranked.len(),
        no_positives: r == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    /// Items already in rank order: descending scores.
    fn list(labels: &[bool]) -> RankedList {
        RankedList::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, &relevant)| RankedItem {
                    id: format!("{i:03}"),
                    score: 1.0 - i as f64 / 100.0,
                    relevant,
                })
                .collect(),
        )
    }

    #[test]
    fn worked_examples() {
        let ap = average_precision(&list(&[true, false, true]));
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((ap - 0.8333333333333333).abs() < 1e-15);
        assert_eq!(average_precision(&list(&[true, true, false, false])), 1.0);
        assert_eq!(average_precision(&list(&[true])), 1.0);
        assert_eq!(average_precision(&list(&[false, false])), 0.0);

        assert_eq!(
            precision_at(&list(&[true, false, false, true, false, true]), 5),
            0.4
        );
        assert_eq!(precision_at(&list(&[true, true, true]), 5), 0.6);
        let perfect = list(&[true, true, false]);
        assert_eq!(precision_at(&perfect, perfect.positives()), 1.0);
    }

    #[test]
    fn ties_break_by_id() {
        let items = vec![
            RankedItem {
                id: "b".into(),
                score: 0.5,
                relevant: false,
            },
            RankedItem {
                id: "a".into(),
                score: 0.5,
                relevant: true,
            },
            RankedItem {
                id: "c".into(),
                score: 0.9,
                relevant: false,
            },
        ];
        let r = RankedList::new(items);
        let ids: Vec<&str> = r.items().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
        assert_eq!(average_precision(&r), 0.5);
    }

    #[test]
    fn zero_positive_query_is_flagged() {
        let q = query_metrics(&list(&[false, false, false]));
        assert!(q.no_positives);
        assert_eq!(q.metrics, MetricVector::default());
    }

    #[test]
    fn metric_vector_mean() {
        let a = MetricVector {
            map: 1.0,
            p5: 0.2,
            p10: 0.1,
            p20: 0.0,
            pr: 1.0,
        };
        let b = MetricVector {
            map: 0.0,
            p5: 0.4,
            p10: 0.3,
            p20: 0.1,
            pr: 0.0,
        };
        let m = MetricVector::mean([&a, &b]);
        assert_eq!(m.map, 0.5);
        assert!((m.p5 - 0.3).abs() < 1e-15);
        assert_eq!(MetricVector::mean([]), MetricVector::default());
    }
}
