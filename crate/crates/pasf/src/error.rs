use thiserror::Error;

/// Unified error type for the library.
///
/// Variants map one-to-one onto the CLI exit codes: `InvalidInput` → 2,
/// `EmptyAtlas` → 3, `Io` → 4 (success is 0).
#[derive(Error, Debug)]
pub enum PasfError {
    /// Malformed arguments, configs, files, or dimension mismatches.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The shrinkage threshold retained no (frequency, rank) entries, so no
    /// filters can be built; callers receive a zero-cluster report instead.
    #[error("empty atlas: {0}")]
    EmptyAtlas(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PasfError>;

impl PasfError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        PasfError::InvalidInput(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PasfError::InvalidInput(_) => 2,
            PasfError::EmptyAtlas(_) => 3,
            PasfError::Io(_) => 4,
        }
    }
}
