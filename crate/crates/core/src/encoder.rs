//! Dual per-word representation: embedding row concatenated with a one-hot
//! dependency tag vector.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{DepTagSet, Sentence, Vocabulary};
use crate::embedding::{EmbeddingTable, Provenance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub use_embeddings: bool,
    pub use_dep_onehot: bool,
    pub embedding_source: Provenance,
    /// Embedding rows receive gradients during network training.
    pub trainable_embeddings: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            use_embeddings: true,
            use_dep_onehot: true,
            embedding_source: Provenance::Trained,
            trainable_embeddings: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.use_embeddings && !self.use_dep_onehot {
            return Err(Error::InvalidConfig(
                "the encoder needs embeddings, dependency tags, or both".into(),
            ));
        }
        Ok(())
    }

    /// Row width for a given embedding dimension and tag-set size.
    pub fn width(&self, embedding_dim: usize, tag_count: usize) -> usize {
        self.embedding_width(embedding_dim) + if self.use_dep_onehot { tag_count } else { 0 }
    }

    pub fn embedding_width(&self, embedding_dim: usize) -> usize {
        if self.use_embeddings {
            embedding_dim
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRef {
    /// Vocabulary index used for the embedding block.
    pub word: usize,
    /// Tag-set index hot in the dependency block.
    pub dep: usize,
}

/// A `T x width` row-major input matrix plus per-row token references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSentence {
    pub width: usize,
    /// Columns `[0, embedding_width)` hold the embedding block.
    pub embedding_width: usize,
    pub rows: Vec<f64>,
    pub token_refs: Vec<TokenRef>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.token_refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_refs.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t * self.width..(t + 1) * self.width]
    }

    /// Copies the input matrix, replacing the embedding block with the
    /// current rows of `table`.
    pub fn with_embeddings(&self, table: &EmbeddingTable) -> Vec<f64> {
        let mut rows = self.rows.clone();
        if self.embedding_width > 0 {
            for (t, r) in self.token_refs.iter().enumerate() {
                rows[t * self.width..t * self.width + self.embedding_width]
                    .copy_from_slice(table.row(r.word));
            }
        }
        rows
    }
}

pub fn encode(
    sentence: &Sentence,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    tags: &DepTagSet,
    config: &EncoderConfig,
) -> Result<EncodedSentence> {
    config.validate()?;
    let embedding_width = match (config.use_embeddings, table) {
        (true, Some(t)) => {
            if t.rows() != vocab.len() {
                return Err(Error::EncoderMismatch(alloc::format!(
                    "embedding table has {} rows for a vocabulary of {}",
                    t.rows(),
                    vocab.len()
                )));
            }
            t.dim()
        }
        (true, None) => {
            return Err(Error::EncoderMismatch(
                "embeddings enabled but no table supplied".into(),
            ));
        }
        (false, _) => 0,
    };
    let tag_width = if config.use_dep_onehot { tags.len() } else { 0 };
    let width = embedding_width + tag_width;
    let mut rows = vec![0.0; sentence.len() * width];
    let mut token_refs = Vec::with_capacity(sentence.len());
    for (t, token) in sentence.tokens.iter().enumerate() {
        let r = TokenRef {
            word: vocab.lookup(&token.norm),
            dep: tags.lookup(&token.dep),
        };
        let row = &mut rows[t * width..(t + 1) * width];
        if let (true, Some(table)) = (config.use_embeddings, table) {
            row[..embedding_width].copy_from_slice(table.row(r.word));
        }
        if config.use_dep_onehot {
            row[embedding_width + r.dep] = 1.0;
        }
        token_refs.push(r);
    }
    Ok(EncodedSentence {
        width,
        embedding_width,
        rows,
        token_refs,
    })
}
