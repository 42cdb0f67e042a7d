use alloc::string::String;
use alloc::vec::Vec;

use super::model::{backward, forward, loss};
use super::params::ModelParams;
use crate::embedding::EmbeddingTable;
use crate::encoder::EncodedSentence;
use crate::Result;

/// Denominator floor of the relative error, so that gradients that are
/// zero up to rounding compare on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst entry.
    pub worst: (String, usize),
    /// Analytic and numeric values at the worst entry.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

fn loss_at(
    encoded: &EncodedSentence,
    rows: Vec<f64>,
    params: &ModelParams,
    label: f64,
) -> Result<f64> {
    let e = EncodedSentence {
        rows,
        ..encoded.clone()
    };
    Ok(loss(forward(&e, params)?.score, label))
}

/// Compares analytic gradients with central differences of step
/// `epsilon` for every parameter and, when `table` is given, every
/// embedding entry the sentence reads.
pub fn check_gradients(
    encoded: &EncodedSentence,
    table: Option<&EmbeddingTable>,
    params: &ModelParams,
    label: f64,
    epsilon: f64,
) -> Result<GradientCheck> {
    let rows = match table {
        Some(t) => encoded.with_embeddings(t),
        None => encoded.rows.clone(),
    };
    let base = EncodedSentence {
        rows: rows.clone(),
        ..encoded.clone()
    };
    let grads = backward(&base, params, label)?;
    let mut result = GradientCheck {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        worst_values: (0.0, 0.0),
        checked: 0,
    };
    let mut record = |name: &str, index: usize, analytic: f64, numeric: f64| {
        let err = relative_error(analytic, numeric);
        result.checked += 1;
        if err > result.max_rel_error || result.checked == 1 {
            result.max_rel_error = err;
            result.worst = (name.into(), index);
            result.worst_values = (analytic, numeric);
        }
    };

    let names = params.tensor_names();
    let analytic: Vec<Vec<f64>> = grads
        .params
        .tensors()
        .iter()
        .map(|t| t.data.clone())
        .collect();
    let mut probe = params.clone();
    for (ti, name) in names.iter().enumerate() {
        for i in 0..analytic[ti].len() {
            let orig = probe.tensors()[ti].data[i];
            probe.tensors_mut()[ti].data[i] = orig + epsilon;
            let up = loss_at(&base, rows.clone(), &probe, label)?;
            probe.tensors_mut()[ti].data[i] = orig - epsilon;
            let down = loss_at(&base, rows.clone(), &probe, label)?;
            probe.tensors_mut()[ti].data[i] = orig;
            record(name, i, analytic[ti][i], (up - down) / (2.0 * epsilon));
        }
    }

    if let Some(t) = table {
        for (&word, g) in &grads.embedding_rows {
            let mut probe = t.clone();
            for (k, &a) in g.iter().enumerate() {
                let orig = probe.row(word)[k];
                probe.row_mut(word)[k] = orig + epsilon;
                let up = loss_at(&base, encoded.with_embeddings(&probe), params, label)?;
                probe.row_mut(word)[k] = orig - epsilon;
                let down = loss_at(&base, encoded.with_embeddings(&probe), params, label)?;
                probe.row_mut(word)[k] = orig;
                record(
                    "embedding",
                    word * t.dim() + k,
                    a,
                    (up - down) / (2.0 * epsilon),
                );
            }
        }
    }
    Ok(result)
}
