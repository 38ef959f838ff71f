use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("need at least 4 samples to estimate quartiles, got {0}")]
    InsufficientSamplesForQuantiles(usize),

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("every sample exceeded the cap (epsilon = {epsilon}); no data left to fit")]
    AllSamplesCapped { epsilon: f64 },

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("objective evaluated to a non-finite value")]
    NonFiniteObjective,

    #[error("need at least 2 users for a standard deviation, got {0}")]
    InsufficientUsers(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    ConfigParse(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::ConfigParse(msg.into())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}
