//! GRU encoder with softmax attention pooling, a ReLU dense layer and a
//! sigmoid output, trained with RMSprop on binary cross entropy.
//!
//! Forward pass for a `T x D` input:
//!
//! ```text
//! z_t = s(x_t W_z + h_{t-1} U_z + b_z)
//! r_t = s(x_t W_r + h_{t-1} U_r + b_r)
//! g_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
//! h_t = (1 - z_t) * h_{t-1} + z_t * g_t          h_0 = 0
//! a_t = softmax_t(score(h_t))
//! c   = sum_t a_t h_t
//! f   = relu(c W_d + b_d)
//! p   = s(f . w_o + b_o)
//! ```
//!
//! Gradients are derived by hand in [`backward`]; [`check_gradients`]
//! compares them with central finite differences.

mod gradcheck;
mod model;
mod optimizer;
mod params;
mod train;

pub use gradcheck::{check_gradients, relative_error, GradientCheck, REL_ERROR_FLOOR};
pub use model::{
    attention_weights, backward, forward, loss, Gradients, Model, Prediction, PROB_CLAMP,
};
pub use optimizer::{rmsprop_update, RmsProp};
pub use params::{AttentionKind, AttentionScorer, ModelParams, ModelShape, Param};
pub use train::{
    grid_search, mean_loss, train, validation_map, EpochRecord, Example, Grid, GridPoint,
    GridSearchOutcome, ModelInit, TrainConfig, TrainOutcome, TrainingLog,
};
