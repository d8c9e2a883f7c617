use std::path::PathBuf;

use thiserror::Error;

/// One row of a solver's residual history.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResidualRecord {
    pub iter: usize,
    /// `‖X − DZ − E‖_∞`
    pub feasibility: f64,
    /// `‖Z − W‖_∞`
    pub split: f64,
    pub mu: f64,
}

/// Context attached to a numerical failure.
#[derive(Debug, Clone)]
pub struct NumericalFailure {
    pub stage: String,
    pub modality: Option<usize>,
    pub detail: String,
    pub history: Vec<ResidualRecord>,
}

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.stage)?;
        if let Some(k) = self.modality {
            write!(f, " (modality {})", k + 1)?;
        }
        write!(f, ": {}", self.detail)?;
        if let Some(last) = self.history.last() {
            write!(
                f,
                " [after {} iterations, feasibility {:.3e}, split {:.3e}, mu {:.3e}]",
                last.iter, last.feasibility, last.split, last.mu
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid solver state: {0}")]
    InvalidState(String),

    #[error("numerical failure in {0}")]
    Numerical(Box<NumericalFailure>),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("cannot decode {}: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },

    #[error("archive format version {found} is not supported (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("truncated blob {name}: expected {expected} bytes, found {found}")]
    Truncated {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("malformed archive: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numerical(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical(Box::new(NumericalFailure {
            stage: stage.into(),
            modality: None,
            detail: detail.into(),
            history: Vec::new(),
        }))
    }

    /// Tags a numerical failure with the modality it came from.
    pub(crate) fn in_modality(self, k: usize) -> Self {
        match self {
            Error::Numerical(mut f) => {
                f.modality = Some(k);
                Error::Numerical(f)
            }
            other => other,
        }
    }

    pub(crate) fn with_history(self, history: Vec<ResidualRecord>) -> Self {
        match self {
            Error::Numerical(mut f) => {
                f.history = history;
                Error::Numerical(f)
            }
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
