//! Text, JSON and CSV renderings of experiment results.
//!
//! All writers are deterministic: rows follow the order of their input and
//! floats use the shortest exact representation (CSV, JSON) or four
//! decimals (summary tables).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use checkworth_core::analysis::OverlapResult;
use checkworth_core::corpus::DatasetStats;
use checkworth_core::eval::{EvalReport, Metric, MetricVector};
use checkworth_core::weaksup::SweepTable;
use serde::Serialize;

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing memory")).expect("CSV is UTF-8")
}

fn metric_header() -> Vec<&'static str> {
    Metric::ALL.iter().map(|m| m.name()).collect()
}

fn metric_cells(m: &MetricVector) -> impl Iterator<Item = String> + '_ {
    Metric::ALL.iter().map(move |&k| m.get(k).to_string())
}

/// Column-aligned table with one line per named configuration, followed by
/// per-repetition means, significance tests and warnings of each report.
pub fn summary_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(12);
    let mut out = String::new();
    let _ = write!(out, "{:width$}", "");
    for name in metric_header() {
        let _ = write!(out, "  {name:>6}");
    }
    out.push('\n');
    let line = |out: &mut String, label: &str, m: &MetricVector| {
        let _ = write!(out, "{label:width$}");
        for k in Metric::ALL {
            let _ = write!(out, "  {:>6.4}", m.get(k));
        }
        out.push('\n');
    };
    for (name, report) in rows {
        line(&mut out, name, &report.grand_means);
    }
    for (name, report) in rows {
        let _ = writeln!(
            out,
            "\n{name}: {} folds x {} repetitions, {} averaging",
            report.folds,
            report.repetitions,
            match report.averaging {
                checkworth_core::eval::Averaging::PerQuery => "per-query",
                checkworth_core::eval::Averaging::Pooled => "pooled",
            }
        );
        for (i, m) in report.per_repetition_means.iter().enumerate() {
            line(&mut out, &format!("  rep {i}"), m);
        }
        if let Some(sig) = &report.significance {
            let _ = writeln!(out, "  paired t-test against {}:", sig.baseline);
            for (metric, t) in &sig.tests {
                let _ = writeln!(
                    out,
                    "    {metric:<5} diff {:+.4}  t {:.3}  df {}  p {:.4}",
                    t.mean_difference, t.t, t.df, t.p
                );
            }
        }
        for w in &report.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    out
}

/// One row per (fold, repetition) query.
pub fn folds_csv(report: &EvalReport) -> String {
    let mut header = vec!["fold", "repetition", "query", "positives", "items"];
    header.extend(metric_header());
    csv_string(
        &header,
        report.per_query.iter().map(|q| {
            let mut row = vec![
                q.fold.to_string(),
                q.repetition.to_string(),
                q.query.clone(),
                q.positives.to_string(),
                q.items.to_string(),
            ];
            row.extend(metric_cells(&q.metrics));
            row
        }),
    )
}

/// Columns `fraction, repetition, MAP, P@5, P@10, P@20, P@R`.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut header = vec!["fraction", "repetition"];
    header.extend(metric_header());
    csv_string(
        &header,
        table.rows.iter().map(|r| {
            let mut row = vec![r.fraction.to_string(), r.repetition.to_string()];
            row.extend(metric_cells(&r.metrics));
            row
        }),
    )
}

pub fn stats_csv(rows: &[(String, DatasetStats)]) -> String {
    csv_string(
        &[
            "dataset",
            "documents",
            "sentences",
            "mean_length",
            "unique_words",
            "mean_label",
        ],
        rows.iter().map(|(name, s)| {
            vec![
                name.clone(),
                s.documents.to_string(),
                s.sentences.to_string(),
                s.mean_length.to_string(),
                s.unique_words.to_string(),
                s.mean_label.map(|m| m.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

/// Long format: one row per (dataset, speaker, bin).
pub fn histogram_csv(histograms: &[(String, BTreeMap<String, Vec<usize>>)]) -> String {
    let rows = histograms.iter().flat_map(|(name, histogram)| {
        histogram.iter().flat_map(move |(speaker, counts)| {
            let bins = counts.len();
            counts.iter().enumerate().map(move |(i, c)| {
                vec![
                    name.clone(),
                    speaker.clone(),
                    (i as f64 / bins as f64).to_string(),
                    ((i + 1) as f64 / bins as f64).to_string(),
                    c.to_string(),
                ]
            })
        })
    });
    csv_string(
        &["dataset", "speaker", "bin_low", "bin_high", "count"],
        rows,
    )
}

pub fn overlap_csv(results: &[OverlapResult]) -> String {
    csv_string(
        &["group", "mean_overlap", "std_overlap"],
        results.iter().map(|r| {
            vec![
                r.group.name().to_string(),
                r.mean_overlap.to_string(),
                r.std_overlap.to_string(),
            ]
        }),
    )
}
