use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bisection did not converge after {iterations} iterations (bracket [{lo:e}, {hi:e}], target {target:e})")]
    BisectionDiverged {
        iterations: usize,
        lo: f64,
        hi: f64,
        target: f64,
    },

    #[error("nonlinear solve did not converge after {sweeps} sweeps (residual {residual:e}, update {update:e})")]
    NoConvergence {
        sweeps: usize,
        residual: f64,
        update: f64,
    },

    #[error("scheme fault at step {step}: cell {cell} has value {value:e}")]
    SchemeFault {
        step: usize,
        cell: usize,
        value: f64,
    },

    #[error("field is not even: asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotEven { asymmetry: f64, tolerance: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
