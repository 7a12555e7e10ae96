use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("comparison position {position} out of range for {bits} bits")]
    BitOutOfRange { position: usize, bits: usize },

    #[error("index needs {0} bits, more than the 63 supported")]
    IndexTooWide(u32),

    #[error("cache does not match the transform: {0}")]
    CacheMismatch(String),

    #[error("learning rule {rule} needs {needs}")]
    RuleCacheMismatch { rule: &'static str, needs: &'static str },

    #[error("operation requires {expected} anchors, table uses {found}")]
    WrongMode {
        expected: &'static str,
        found: &'static str,
    },

    #[error("index cache is stale: embeddings changed after the cache was built")]
    StaleCache,

    #[error("empty token sequence")]
    EmptySequence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("training diverged at step {step}: loss is NaN")]
    Divergence { step: u64 },

    #[error("non-finite activation: {0}")]
    NonFinite(String),

    #[error("checkpoint: bad magic {0:?}, expected \"PLYC\"")]
    BadMagic([u8; 4]),

    #[error("checkpoint: unsupported version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint: file truncated")]
    Truncated,

    #[error("checkpoint: malformed ({0})")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
