use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("{op} did not converge")]
    NoConvergence { op: &'static str },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonpositive internal energy B = {value:e} in cell {cell}")]
    NonPositiveEnergy { cell: usize, value: f64 },

    #[error("coupled cell solve failed in cell {cell}: B1/B0 = {ratio:e}")]
    CoupledSolve { cell: usize, ratio: f64 },

    #[error("non-finite value at step {step} ({stage})")]
    NonFinite { step: usize, stage: &'static str },

    #[error("low-rank step failed in stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step} failed: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
