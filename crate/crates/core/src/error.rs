use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet must be non-empty")]
    EmptyAlphabet,
    #[error("duplicate symbol `{0}` in alphabet")]
    DuplicateSymbol(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate axis `{0}`")]
    DuplicateAxis(String),
    #[error("unknown symbol `{symbol}` on axis `{axis}`")]
    UnknownSymbol { axis: String, symbol: String },
    #[error("negative weight {weight} at cell {cell}")]
    NegativeWeight { cell: String, weight: f64 },
    #[error("weights sum to {sum} but normalizer is {normalizer}")]
    NormalizerMismatch { sum: f64, normalizer: f64 },
    #[error("weight table has {got} cells, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("conditioning event {axis}={symbol} has zero probability")]
    ZeroProbabilityEvent { axis: String, symbol: String },
    #[error("product table would have {cells} cells, above the cap of {cap}")]
    CellCapExceeded { cells: u128, cap: u128 },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("row {row} is not a probability vector: {reason}")]
    NotStochastic { row: usize, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(String),
    #[error("perturbation {epsilon} is inadmissible: transition {transition} leaves [0,1]")]
    InadmissiblePerturbation { epsilon: f64, transition: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
    }
}
