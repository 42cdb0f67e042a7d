//! File formats, experiment runners and the command-line interface for
//! [`checkworth_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod jsonl;
pub mod manifest;
pub mod render;
pub mod report;
pub mod word2vec;
