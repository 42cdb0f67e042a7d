//! Versioned JSON model checkpoints.
//!
//! A checkpoint carries the network parameters, the encoder configuration,
//! the vocabulary and tag set with their SHA-256 hashes, and the embedding
//! table used for encoding. Loading recomputes both hashes and refuses a
//! file whose lookup tables do not match them.

use std::path::Path;

use checkworth_core::corpus::{DepTagSet, Vocabulary};
use checkworth_core::embedding::EmbeddingTable;
use checkworth_core::encoder::EncoderConfig;
use checkworth_core::network::{Model, ModelParams};
use checkworth_core::pipeline::Resources;
use serde::{Deserialize, Serialize};

use crate::manifest::sha256_bytes;

pub const FORMAT: &str = "checkworth-model";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a model checkpoint (format `{0}`)")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("{what} hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch {
        what: &'static str,
        stored: String,
        computed: String,
    },
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
}

/// Hash of an ordered string list, one entry per line.
pub fn list_hash(items: &[String]) -> String {
    let mut joined = String::new();
    for item in items {
        joined.push_str(item);
        joined.push('\n');
    }
    sha256_bytes(joined.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub encoder: EncoderConfig,
    pub vocabulary: Vocabulary,
    pub vocabulary_sha256: String,
    pub tags: DepTagSet,
    pub tags_sha256: String,
    pub params: ModelParams,
    /// The table sentences are encoded with: the fine-tuned rows when
    /// embeddings were trainable, the input table otherwise.
    pub embeddings: Option<EmbeddingTable>,
}

impl Checkpoint {
    pub fn new(model: &Model, resources: &Resources, encoder: EncoderConfig) -> Self {
        let embeddings = if encoder.use_embeddings {
            model
                .embeddings
                .clone()
                .or_else(|| resources.embeddings.clone())
        } else {
            None
        };
        Self {
            format: FORMAT.into(),
            version: VERSION,
            encoder,
            vocabulary_sha256: list_hash(resources.vocab.words()),
            vocabulary: resources.vocab.clone(),
            tags_sha256: list_hash(resources.tags.tags()),
            tags: resources.tags.clone(),
            params: model.params.clone(),
            embeddings,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoints serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        ckpt.verify()?;
        Ok(ckpt)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn verify(&self) -> Result<(), CheckpointError> {
        if self.format != FORMAT {
            return Err(CheckpointError::Format(self.format.clone()));
        }
        if self.version != VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        for (what, stored, computed) in [
            (
                "vocabulary",
                &self.vocabulary_sha256,
                list_hash(self.vocabulary.words()),
            ),
            ("tag set", &self.tags_sha256, list_hash(self.tags.tags())),
        ] {
            if *stored != computed {
                return Err(CheckpointError::HashMismatch {
                    what,
                    stored: stored.clone(),
                    computed,
                });
            }
        }
        let emb_dim = match (&self.embeddings, self.encoder.use_embeddings) {
            (Some(t), true) if t.rows() == self.vocabulary.len() => t.dim(),
            (None, false) => 0,
            _ => {
                return Err(CheckpointError::Inconsistent(
                    "embedding table does not match the encoder and vocabulary".into(),
                ))
            }
        };
        let width = self.encoder.width(emb_dim, self.tags.len());
        if width != self.params.shape.input_size {
            return Err(CheckpointError::Inconsistent(format!(
                "encoder width {width} but the network expects {}",
                self.params.shape.input_size
            )));
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        Model::new(self.params.clone(), self.embeddings.clone())
    }

    pub fn resources(&self) -> Resources {
        Resources {
            vocab: self.vocabulary.clone(),
            tags: self.tags.clone(),
            embeddings: self.embeddings.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use checkworth_core::embedding::random_table;
    use checkworth_core::network::ModelShape;
    use checkworth_core::rng::rng_for;

    fn sample() -> Checkpoint {
        let vocab = Vocabulary::from_words(vec!["<unk>".into(), "a".into()], 1).unwrap();
        let tags = DepTagSet::from_tags(vec!["<unk>".into(), "nsubj".into()]).unwrap();
        let table = random_table(2, 3, 0).unwrap();
        let encoder = EncoderConfig::default();
        let shape = ModelShape::with_ratio(encoder.width(3, tags.len()), 4);
        let params = ModelParams::init(shape, &mut rng_for(0, "p", &[])).unwrap();
        let resources = Resources {
            vocab,
            tags,
            embeddings: Some(table.clone()),
        };
        Checkpoint::new(&Model::new(params, Some(table)), &resources, encoder)
    }

    #[test]
    fn roundtrip() {
        let c = sample();
        let back = Checkpoint::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn tampered_vocabulary_is_rejected() {
        let c = sample();
        let json = c.to_json().replacen(r#""a""#, r#""b""#, 1);
        let err = Checkpoint::from_json(&json).unwrap_err();
        assert!(
            matches!(
                err,
                CheckpointError::HashMismatch {
                    what: "vocabulary",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn tampered_tags_are_rejected() {
        let mut c = sample();
        c.tags_sha256 = list_hash(&["x".into()]);
        assert!(matches!(
            Checkpoint::from_json(&c.to_json()).unwrap_err(),
            CheckpointError::HashMismatch {
                what: "tag set",
                ..
            }
        ));
    }

    #[test]
    fn wrong_format_or_version() {
        let mut c = sample();
        c.version = 9;
        assert!(matches!(c.verify(), Err(CheckpointError::Version(9))));
        c.version = VERSION;
        c.format = "other".into();
        assert!(matches!(c.verify(), Err(CheckpointError::Format(_))));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut c = sample();
        c.encoder.use_dep_onehot = false;
        assert!(matches!(c.verify(), Err(CheckpointError::Inconsistent(_))));
    }
}
