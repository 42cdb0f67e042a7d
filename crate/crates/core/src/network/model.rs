use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{AttentionScorer, ModelParams};
use crate::embedding::EmbeddingTable;
use crate::encoder::EncodedSentence;
use crate::math::{dot, exp, ln, sigmoid, tanh};
use crate::{Error, Result};

/// Predictions are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before the loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Output probability, clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub score: f64,
    /// One attention weight per token.
    pub attention: Vec<f64>,
}

/// Binary cross entropy; accepts soft labels.
pub fn loss(prediction: f64, label: f64) -> f64 {
    let p = prediction.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(label * ln(p) + (1.0 - label) * ln(1.0 - p))
}

/// Numerically stable softmax.
pub fn attention_weights(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| exp(s - max)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|a| *a /= total);
    out
}

/// Intermediate values kept for the backward pass.
struct Trace {
    /// `hs[0]` is the zero initial state; `hs[t + 1]` follows input row `t`.
    hs: Vec<Vec<f64>>,
    zs: Vec<Vec<f64>>,
    rs: Vec<Vec<f64>>,
    gs: Vec<Vec<f64>>,
    /// tanh layer outputs of the MLP scorer (empty for the affine scorer).
    us: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    context: Vec<f64>,
    dense_pre: Vec<f64>,
    dense: Vec<f64>,
    prob: f64,
}

fn check_width(rows: &[f64], steps: usize, params: &ModelParams) -> Result<()> {
    let d = params.shape.input_size;
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "cannot score an empty sentence".into(),
        ));
    }
    if rows.len() != steps * d {
        return Err(Error::WidthMismatch {
            expected: d,
            found: rows.len() / steps,
        });
    }
    Ok(())
}

fn run(rows: &[f64], steps: usize, params: &ModelParams) -> Result<Trace> {
    check_width(rows, steps, params)?;
    let d = params.shape.input_size;
    let h = params.shape.hidden_size;
    let f = params.shape.dense_size;

    let mut hs = Vec::with_capacity(steps + 1);
    hs.push(vec![0.0; h]);
    let mut zs = Vec::with_capacity(steps);
    let mut rs = Vec::with_capacity(steps);
    let mut gs = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = &rows[t * d..(t + 1) * d];
        let prev = &hs[t];
        let mut z = params.b_z.data.clone();
        params.w_z.left_mul_add(x, &mut z);
        params.u_z.left_mul_add(prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = params.b_r.data.clone();
        params.w_r.left_mul_add(x, &mut r);
        params.u_r.left_mul_add(prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let gated: Vec<f64> = r.iter().zip(prev).map(|(a, b)| a * b).collect();
        let mut g = params.b_h.data.clone();
        params.w_h.left_mul_add(x, &mut g);
        params.u_h.left_mul_add(&gated, &mut g);
        g.iter_mut().for_each(|v| *v = tanh(*v));

        let next: Vec<f64> = (0..h)
            .map(|j| (1.0 - z[j]) * prev[j] + z[j] * g[j])
            .collect();
        zs.push(z);
        rs.push(r);
        gs.push(g);
        hs.push(next);
    }

    let mut us = Vec::new();
    let scores: Vec<f64> = match &params.attention {
        AttentionScorer::Affine { w, b } => hs[1..]
            .iter()
            .map(|ht| dot(&w.data, ht) + b.data[0])
            .collect(),
        AttentionScorer::TanhMlp { w_a, b_a, v, b } => hs[1..]
            .iter()
            .map(|ht| {
                let mut u = b_a.data.clone();
                w_a.left_mul_add(ht, &mut u);
                u.iter_mut().for_each(|x| *x = tanh(*x));
                let s = dot(&v.data, &u) + b.data[0];
                us.push(u);
                s
            })
            .collect(),
    };
    let alphas = attention_weights(&scores);

    let mut context = vec![0.0; h];
    for (a, ht) in alphas.iter().zip(&hs[1..]) {
        for (c, v) in context.iter_mut().zip(ht) {
            *c += a * v;
        }
    }
    let mut dense_pre = params.b_d.data.clone();
    params.w_d.left_mul_add(&context, &mut dense_pre);
    let dense: Vec<f64> = dense_pre.iter().map(|&v| v.max(0.0)).collect();
    debug_assert_eq!(dense.len(), f);
    let prob = sigmoid(dot(&params.w_o.data, &dense) + params.b_o.data[0]);

    if !prob.is_finite() || !context.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("forward pass"));
    }
    Ok(Trace {
        hs,
        zs,
        rs,
        gs,
        us,
        alphas,
        context,
        dense_pre,
        dense,
        prob,
    })
}

pub(crate) fn forward_rows(rows: &[f64], steps: usize, params: &ModelParams) -> Result<Prediction> {
    let trace = run(rows, steps, params)?;
    Ok(Prediction {
        score: trace.prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP),
        attention: trace.alphas,
    })
}

pub fn forward(encoded: &EncodedSentence, params: &ModelParams) -> Result<Prediction> {
    forward_rows(&encoded.rows, encoded.len(), params)
}

/// Parameter gradients plus gradients of the embedding rows a sentence used.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: ModelParams,
    pub embedding_rows: BTreeMap<usize, Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            params: params.zeros_like(),
            embedding_rows: BTreeMap::new(),
        }
    }

    pub(crate) fn reset(&mut self) {
        self.params.set_zero();
        self.embedding_rows.clear();
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.params.scale(factor);
        for row in self.embedding_rows.values_mut() {
            row.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Adds the gradient of the BCE loss for one sentence into `grads` and
/// returns the loss. The logit gradient is `p - y` on the unclamped
/// probability.
pub(crate) fn accumulate(
    encoded: &EncodedSentence,
    rows: &[f64],
    params: &ModelParams,
    label: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let steps = encoded.len();
    let tr = run(rows, steps, params)?;
    let d = params.shape.input_size;
    let hsz = params.shape.hidden_size;
    let g = &mut grads.params;

    // Output unit: p = sigmoid(w_o . f + b_o).
    let d_logit = tr.prob - label;
    for (gw, fv) in g.w_o.data.iter_mut().zip(&tr.dense) {
        *gw += d_logit * fv;
    }
    g.b_o.data[0] += d_logit;

    // Dense ReLU layer.
    let d_pre: Vec<f64> = params
        .w_o
        .data
        .iter()
        .zip(&tr.dense_pre)
        .map(|(w, &pre)| if pre > 0.0 { d_logit * w } else { 0.0 })
        .collect();
    g.w_d.outer_add(&tr.context, &d_pre);
    g.b_d.add_slice(&d_pre);
    let mut d_context = vec![0.0; hsz];
    params.w_d.right_mul_add(&d_pre, &mut d_context);

    // Attention pooling: c = sum_t a_t h_t, a = softmax(s).
    let d_alpha: Vec<f64> = tr.hs[1..].iter().map(|ht| dot(&d_context, ht)).collect();
    let expected: f64 = tr.alphas.iter().zip(&d_alpha).map(|(a, da)| a * da).sum();
    let d_scores: Vec<f64> = tr
        .alphas
        .iter()
        .zip(&d_alpha)
        .map(|(a, da)| a * (da - expected))
        .collect();

    let mut d_hidden: Vec<Vec<f64>> = tr
        .alphas
        .iter()
        .map(|&a| d_context.iter().map(|c| a * c).collect())
        .collect();
    match (&params.attention, &mut g.attention) {
        (AttentionScorer::Affine { w, .. }, AttentionScorer::Affine { w: gw, b: gb }) => {
            for t in 0..steps {
                let ds = d_scores[t];
                gb.data[0] += ds;
                for j in 0..hsz {
                    gw.data[j] += ds * tr.hs[t + 1][j];
                    d_hidden[t][j] += ds * w.data[j];
                }
            }
        }
        (
            AttentionScorer::TanhMlp { w_a, v, .. },
            AttentionScorer::TanhMlp {
                w_a: gw_a,
                b_a: gb_a,
                v: gv,
                b: gb,
            },
        ) => {
            for t in 0..steps {
                let ds = d_scores[t];
                gb.data[0] += ds;
                let u = &tr.us[t];
                for (gvk, uk) in gv.data.iter_mut().zip(u) {
                    *gvk += ds * uk;
                }
                let d_u_pre: Vec<f64> = v
                    .data
                    .iter()
                    .zip(u)
                    .map(|(vk, uk)| ds * vk * (1.0 - uk * uk))
                    .collect();
                gw_a.outer_add(&tr.hs[t + 1], &d_u_pre);
                gb_a.add_slice(&d_u_pre);
                w_a.right_mul_add(&d_u_pre, &mut d_hidden[t]);
            }
        }
        _ => unreachable!("gradient buffer shares the parameter layout"),
    }

    // Backpropagation through time.
    let mut d_rows = vec![0.0; rows.len()];
    let mut carry = vec![0.0; hsz];
    for t in (0..steps).rev() {
        let x = &rows[t * d..(t + 1) * d];
        let prev = &tr.hs[t];
        let (z, r, cand) = (&tr.zs[t], &tr.rs[t], &tr.gs[t]);
        let dh: Vec<f64> = d_hidden[t].iter().zip(&carry).map(|(a, b)| a + b).collect();

        let mut d_prev: Vec<f64> = (0..hsz).map(|j| dh[j] * (1.0 - z[j])).collect();
        let d_z_pre: Vec<f64> = (0..hsz)
            .map(|j| dh[j] * (cand[j] - prev[j]) * z[j] * (1.0 - z[j]))
            .collect();
        let d_g_pre: Vec<f64> = (0..hsz)
            .map(|j| dh[j] * z[j] * (1.0 - cand[j] * cand[j]))
            .collect();

        let gated: Vec<f64> = r.iter().zip(prev).map(|(a, b)| a * b).collect();
        g.w_h.outer_add(x, &d_g_pre);
        g.u_h.outer_add(&gated, &d_g_pre);
        g.b_h.add_slice(&d_g_pre);
        let mut d_gated = vec![0.0; hsz];
        params.u_h.right_mul_add(&d_g_pre, &mut d_gated);
        let d_r_pre: Vec<f64> = (0..hsz)
            .map(|j| d_gated[j] * prev[j] * r[j] * (1.0 - r[j]))
            .collect();
        for j in 0..hsz {
            d_prev[j] += d_gated[j] * r[j];
        }

        g.w_z.outer_add(x, &d_z_pre);
        g.u_z.outer_add(prev, &d_z_pre);
        g.b_z.add_slice(&d_z_pre);
        g.w_r.outer_add(x, &d_r_pre);
        g.u_r.outer_add(prev, &d_r_pre);
        g.b_r.add_slice(&d_r_pre);
        params.u_z.right_mul_add(&d_z_pre, &mut d_prev);
        params.u_r.right_mul_add(&d_r_pre, &mut d_prev);

        if encoded.embedding_width > 0 {
            let dx = &mut d_rows[t * d..(t + 1) * d];
            params.w_h.right_mul_add(&d_g_pre, dx);
            params.w_z.right_mul_add(&d_z_pre, dx);
            params.w_r.right_mul_add(&d_r_pre, dx);
        }
        carry = d_prev;
    }

    if encoded.embedding_width > 0 {
        for (t, token) in encoded.token_refs.iter().enumerate() {
            let block = &d_rows[t * d..t * d + encoded.embedding_width];
            let row = grads
                .embedding_rows
                .entry(token.word)
                .or_insert_with(|| vec![0.0; encoded.embedding_width]);
            for (acc, v) in row.iter_mut().zip(block) {
                *acc += v;
            }
        }
    }
    Ok(loss(tr.prob, label))
}

/// Exact gradients of the BCE loss for one sentence. The dependency one-hot
/// block is input data and gets no gradient.
pub fn backward(encoded: &EncodedSentence, params: &ModelParams, label: f64) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(params);
    accumulate(encoded, &encoded.rows, params, label, &mut grads)?;
    Ok(grads)
}

/// Network weights plus, when embeddings are fine-tuned, the model's own
/// copy of the embedding table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: ModelParams,
    pub embeddings: Option<EmbeddingTable>,
}

impl Model {
    pub fn new(params: ModelParams, embeddings: Option<EmbeddingTable>) -> Self {
        Self { params, embeddings }
    }

    /// Input matrix for `encoded`, with the embedding block taken from the
    /// model's own table when it has one.
    pub fn inputs<'a>(&self, encoded: &'a EncodedSentence) -> Cow<'a, [f64]> {
        match &self.embeddings {
            Some(table) if encoded.embedding_width > 0 => {
                Cow::Owned(encoded.with_embeddings(table))
            }
            _ => Cow::Borrowed(&encoded.rows),
        }
    }

    pub fn predict(&self, encoded: &EncodedSentence) -> Result<Prediction> {
        forward_rows(&self.inputs(encoded), encoded.len(), &self.params)
    }
}
