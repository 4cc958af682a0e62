//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by instance validation, pricing and file handling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The no-arbitrage strip `down < rate < up` is violated.
    #[error("market admits arbitrage or degeneracy: need down < rate < up, got down={down}, rate={rate}, up={up}")]
    ArbitrageBounds { down: f64, rate: f64, up: f64 },

    /// An ordering constraint between adapted processes fails at a node.
    #[error("ordering violated at node (t={t}, idx={idx}): {what}")]
    OrderingViolation { t: usize, idx: usize, what: String },

    /// Terminal payoffs are required to coincide but do not.
    #[error("terminal payoffs differ at node (t={t}, idx={idx}): {what}")]
    TerminalMismatch { t: usize, idx: usize, what: String },

    /// An exhaustive enumeration would exceed the configured bound.
    #[error("enumeration too large: {size} entries exceed bound {bound}")]
    EnumerationTooLarge { size: u128, bound: u128 },

    /// Up and down branch prices coincide, so replication is impossible.
    #[error("degenerate branch at node (t={t}, idx={idx}): up and down prices coincide")]
    DegenerateBranch { t: usize, idx: usize },

    /// The instance cannot be priced (e.g. a bottom element at the root).
    #[error("ill-posed instance: {0}")]
    IllPosed(String),

    /// Array lengths do not match the tree layout.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A structured text file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
