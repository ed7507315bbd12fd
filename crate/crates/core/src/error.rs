use std::fmt;

use thiserror::Error;

/// Line/column of a token in a spec or hardware-model source (1-based).
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

// Positions are diagnostics; two ASTs that differ only in where they were
// parsed from are the same program.
impl PartialEq for Pos {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Pos {}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{pos}: syntax error: expected {expected}, found {found}")]
    Syntax { pos: Pos, expected: String, found: String },

    #[error("{pos}: unknown statement `{name}`")]
    UnknownStatement { pos: Pos, name: String },

    #[error("{pos}: duplicate name `{name}`")]
    DuplicateName { pos: Pos, name: String },

    #[error("{pos}: unresolved name `{name}`")]
    Unresolved { pos: Pos, name: String },

    #[error("{pos}: cyclic binding through `{name}`")]
    CyclicBinding { pos: Pos, name: String },

    #[error("{pos}: expression does not fit the grammar: {reason}")]
    Shape { pos: Pos, reason: String },

    #[error("{pos}: rate {value} for `{name}` is outside [0, 0.5)")]
    RateRange { pos: Pos, name: String, value: f64 },

    #[error("set size {0} is even; bundle a tie-breaker first")]
    EvenSetSize(usize),

    #[error("parity violation: {0}")]
    Parity(String),

    #[error("product of {0} factors exceeds the supported width {1}")]
    UnsupportedWidth(usize, usize),

    #[error("unsupported query/data-structure combination: {0}")]
    UnsupportedQds(String),

    #[error("invalid k = {k}: {reason}")]
    InvalidK { k: usize, reason: String },

    #[error("composed bit-flip probability {0} is not below 0.5")]
    NoiseTooHigh(f64),

    #[error("distributions have no crossing between the means")]
    NoIntersection,

    #[error("violation of dimensional constraints: requirement `{0}` needs more than max-n")]
    DimensionalConstraint(String),

    #[error("degenerate tuple: all codes cancel")]
    DegenerateTuple,

    #[error("capacity {0} exceeded")]
    Capacity(usize),

    #[error("independence violation: {0}")]
    Independence(String),

    #[error("element outside the declared space: {0}")]
    OutsideSpace(String),

    #[error("key `{0}` already bound in this record")]
    DuplicateKey(String),

    #[error("ambiguous analogy: {0} candidates under threshold")]
    AmbiguousAnalogy(usize),

    #[error("unknown record {0}")]
    UnknownRecord(usize),

    #[error("bad hypervector dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Source position when the error came from parsing or resolution.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            Error::Syntax { pos, .. }
            | Error::UnknownStatement { pos, .. }
            | Error::DuplicateName { pos, .. }
            | Error::Unresolved { pos, .. }
            | Error::CyclicBinding { pos, .. }
            | Error::Shape { pos, .. }
            | Error::RateRange { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
