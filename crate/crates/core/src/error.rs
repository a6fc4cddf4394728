use std::path::PathBuf;

/// Errors raised by the library.
///
/// Variants are grouped by [`ErrorClass`] so front ends can map them onto
/// exit codes without matching every variant.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("softmax column {column} is fully masked")]
    DegenerateColumn { column: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("tape already consumed by a backward pass")]
    TapeConsumed,

    #[error("token id {id} out of range 1..={max}")]
    TokenRange { id: usize, max: usize },

    #[error("byte 0x{byte:02x} is not covered by the vocabulary")]
    Coverage { byte: u8 },

    #[error("vocabulary capacity: {0}")]
    Capacity(String),

    #[error("sequence length {len} exceeds context length {max}")]
    ContextLength { len: usize, max: usize },

    #[error("invalid hyperparameters: {0}")]
    HyperParams(String),

    #[error("vocabulary file line {line}: {msg}")]
    VocabFormat { line: usize, msg: String },

    #[error("not a checkpoint (bad magic {0:?})")]
    BadMagic([u8; 4]),

    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),

    #[error("checkpoint CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },

    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),

    #[error("checkpoint contains unknown tensor {0}")]
    UnknownTensor(String),

    #[error("malformed checkpoint: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad caller input: shapes, ranges, hyperparameters, lengths.
    Usage,
    /// Malformed or unreadable files.
    Data,
    /// NaN/Inf or degenerate numerics.
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFinite { .. } | Error::DegenerateColumn { .. } => ErrorClass::Numeric,
            Error::VocabFormat { .. }
            | Error::BadMagic(_)
            | Error::BadVersion(_)
            | Error::Crc { .. }
            | Error::MissingTensor(_)
            | Error::UnknownTensor(_)
            | Error::Format(_)
            | Error::Io { .. }
            | Error::Coverage { .. } => ErrorClass::Data,
            Error::Shape { .. }
            | Error::Contract(_)
            | Error::TapeConsumed
            | Error::TokenRange { .. }
            | Error::ContextLength { .. }
            | Error::Capacity(_)
            | Error::HyperParams(_) => ErrorClass::Usage,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
