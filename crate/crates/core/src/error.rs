use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible plan geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("plan invariant violated: {0}")]
    PlanInvariant(String),

    #[error("dimension mismatch: expected {expected} rates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid rate {rate} for object {object}")]
    InvalidRate { object: usize, rate: f64 },

    #[error("demand lies outside the capacity region")]
    OutsideRegion,

    #[error("empty candidate pool for user {user} (access node {node})")]
    EmptyPool { user: usize, node: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trace does not match plan: {0}")]
    Mismatch(String),

    #[error("linear program solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
