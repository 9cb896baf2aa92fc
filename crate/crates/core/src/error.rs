use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: no admissible pivot in column {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("time step {step} failed: Newton residual {residual:.3e} after {iterations} iterations")]
    StepFailure {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("eigenvalue iteration did not converge: residual history {history:?}")]
    EigenNonConvergence { history: Vec<f64> },

    #[error("value {value} outside entropy table range [{lo}, {hi}]")]
    EntropyRange { value: f64, lo: f64, hi: f64 },

    #[error("model assumption violated: {0}")]
    ModelAssumption(String),

    #[error("config error ({key}): {message}")]
    Config { key: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
