use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("axis `{0}` appears more than once")]
    DuplicateAxis(String),
    #[error("axis sets overlap on `{0}`")]
    OverlappingAxes(String),
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("alphabet `{name}` has size {size}, allowed range is 1..={max}")]
    AlphabetSize { name: String, size: usize, max: usize },
    #[error("tensor with {0} entries exceeds the size cap")]
    TooLarge(usize),
    #[error("expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid probability entry {0}")]
    InvalidEntry(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("conditional row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("conditioning on an event of zero probability")]
    ZeroProbabilityEvent,
    #[error("sequence error: {0}")]
    Sequence(String),
    #[error("constraint problem is infeasible: {0}")]
    Infeasible(String),
    #[error("structural precondition failed: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("codebook of {0:.3e} symbols exceeds the memory bound")]
    CodebookTooLarge(f64),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
