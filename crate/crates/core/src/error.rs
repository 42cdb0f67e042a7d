use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),
    #[error("sentence `{0}` has no tokens")]
    EmptySentence(String),
    #[error("sentence `{id}`: {message}")]
    InvalidToken { id: String, message: String },
    #[error("sentence `{id}`: label {label} outside [0, 1]")]
    LabelOutOfRange { id: String, label: f64 },
    #[error("sentence `{id}`: gold label {label} is not binary")]
    NonBinaryGold { id: String, label: f64 },
    #[error("sentence `{0}` has no label")]
    MissingLabel(String),
    #[error("no word occurs at least {0} times")]
    EmptyVocabulary(usize),
    #[error("cross-validation needs at least two speeches, found {0}")]
    TooFewSpeeches(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input width {found} does not match expected width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("embedding dimension {found} does not match requested dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty label list")]
    EmptyLabels,
    #[error("{group} group has {found} sentences, at least {needed} required")]
    InsufficientPopulation {
        group: &'static str,
        found: usize,
        needed: usize,
    },
    #[error("sentence `{0}` was not scored")]
    Unscored(String),
    #[error("encoder mismatch: {0}")]
    EncoderMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}
