//! Neural check-worthiness sentence ranking.
//!
//! Every word of a sentence is represented twice: by a dense word embedding
//! and by a one-hot vector of its syntactic dependency tag. The concatenated
//! rows run through a GRU whose outputs are pooled with softmax attention, a
//! ReLU dense layer and a sigmoid output unit. The network is trained with
//! RMSprop on binary cross entropy, optionally after pretraining on weakly
//! labelled sentences.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the experiment
//! runner CLI and report rendering live in the `checkworth` crate.
//!
//! Module map:
//!
//! - [`corpus`]: sentences, datasets, vocabulary, dependency tag set, fold plans
//! - [`embedding`]: skip-gram negative sampling, random and imported tables
//! - [`encoder`]: the dual per-word representation
//! - [`network`]: GRU + attention scorer, analytic gradients, RMSprop, training
//! - [`weaksup`]: weak label thresholding, pretrain/fine-tune, fraction sweeps
//! - [`eval`]: MAP / P@k / P@R, the cross-validation protocol, paired t-test
//! - [`analysis`]: dependency tag overlap statistics and attention explanations
//! - [`pipeline`]: the glue that runs one configuration through the protocol
//! - [`synthetic`]: a seeded benchmark generator with known signal structure
#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod encoder;
mod error;
pub mod eval;
mod math;
pub mod network;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod weaksup;

pub use error::{Error, Result};
