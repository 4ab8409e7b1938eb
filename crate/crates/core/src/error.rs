use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    /// The closed form has a removable singularity at this point.
    #[error("closed form is singular at {what}; use the quadrature fallback")]
    Singular { what: String },

    #[error("degenerate technology: gamma ({gamma}) equals beta ({beta})")]
    DegenerateTechnology { beta: f64, gamma: f64 },

    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("insufficient tail: k = {k} order statistics, need at least {needed}")]
    InsufficientTail { k: usize, needed: usize },

    #[error("degenerate tail: log-spacings sum to zero")]
    DegenerateTail,

    #[error("degenerate regressor: zero variance in explanatory variable")]
    DegenerateRegressor,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("demeaning did not converge after {sweeps} sweeps (max cell mean {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing field `{field}` for firm {firm_id}")]
    MissingField { field: &'static str, firm_id: String },

    #[error("duplicate id `{0}` within a period")]
    DuplicateId(String),

    #[error("no surviving firms between the two periods")]
    NoSurvivors,

    #[error("key not found: {0}")]
    KeyNotFound(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
