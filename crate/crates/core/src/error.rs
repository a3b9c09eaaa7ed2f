use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One violated field, named by its dotted scenario path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed:\n{}", format_violations(.0))]
    Validation(Vec<FieldError>),

    #[error("mAP is undefined: no ground-truth objects")]
    NoGroundTruth,

    #[error("energy fractions are undefined: total energy is zero")]
    ZeroEnergy,

    #[error(
        "calibration did not converge within budget (best: onboard mAP {:.4}, gain {:.4})",
        .0.onboard_map,
        .0.gain
    )]
    Calibration(Box<crate::inference::calibrate::Calibration>),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

fn format_violations(v: &[FieldError]) -> String {
    v.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n")
}

/// Turn accumulated violations into a result.
pub(crate) fn check(violations: Vec<FieldError>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(violations))
    }
}
