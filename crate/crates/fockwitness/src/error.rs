use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// The Fock cutoff cannot faithfully support the requested state or
    /// operation: too much probability mass sits at (or would be pushed
    /// beyond) the truncation level.
    #[error("Fock cutoff too small: {0}")]
    CutoffTooSmall(String),

    /// A parameter or domain invariant was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An exact integer computation exceeded the representable range.
    #[error("integer overflow: {0}")]
    Overflow(String),

    /// A phase-scanned correlator grid carries spectral power outside the
    /// band the requested extraction assumes, so the top coefficients would
    /// be corrupted by folding.
    #[error("aliasing detected: {0}")]
    AliasingDetected(String),

    /// The requested combination (e.g. a closed form for a family/minor
    /// pair) is not implemented because no exact expression exists for it.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
