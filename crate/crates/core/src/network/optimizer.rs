use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::model::Gradients;
use super::params::ModelParams;
use crate::embedding::EmbeddingTable;
use crate::math::sqrt;

/// One elementwise RMSprop update:
/// `acc = decay * acc + (1 - decay) * g^2; theta -= lr * g / sqrt(acc + eps)`.
pub fn rmsprop_update(
    theta: &mut [f64],
    grad: &[f64],
    acc: &mut [f64],
    learning_rate: f64,
    decay: f64,
    epsilon: f64,
) {
    for ((t, &g), a) in theta.iter_mut().zip(grad).zip(acc.iter_mut()) {
        *a = decay * *a + (1.0 - decay) * g * g;
        *t -= learning_rate * g / sqrt(*a + epsilon);
    }
}

/// RMSprop state for a model and, optionally, its embedding table.
///
/// Embedding accumulators are sparse: only rows that received a gradient
/// are touched on a step.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    acc: Vec<Vec<f64>>,
    embedding_acc: BTreeMap<usize, Vec<f64>>,
}

impl RmsProp {
    pub fn new(params: &ModelParams, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            acc: params
                .tensors()
                .iter()
                .map(|t| vec![0.0; t.len()])
                .collect(),
            embedding_acc: BTreeMap::new(),
        }
    }

    pub fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &Gradients,
        embeddings: Option<&mut EmbeddingTable>,
    ) {
        let (lr, decay, eps) = (self.learning_rate, self.decay, self.epsilon);
        for ((theta, g), acc) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.params.tensors())
            .zip(self.acc.iter_mut())
        {
            rmsprop_update(&mut theta.data, &g.data, acc, lr, decay, eps);
        }
        if let Some(table) = embeddings {
            for (&row, g) in &grads.embedding_rows {
                let acc = self
                    .embedding_acc
                    .entry(row)
                    .or_insert_with(|| vec![0.0; g.len()]);
                rmsprop_update(table.row_mut(row), g, acc, lr, decay, eps);
            }
        }
    }
}
