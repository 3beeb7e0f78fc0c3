use std::path::PathBuf;

use thiserror::Error;

use crate::types::Label;

/// Errors raised by the filtering, control and simulation code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate particle density: total weight {0} is not positive")]
    DegenerateDensity(f64),

    #[error("label {0} is not part of the density")]
    UnknownLabel(Label),

    #[error("duplicate label {0} in labeled density")]
    DuplicateLabel(Label),

    #[error("bearing undefined: target coincides with the sensor position")]
    UndefinedBearing,

    #[error("measurement index {index} out of range for {len} measurements")]
    MeasurementIndex { index: usize, len: usize },

    #[error("update produced no hypothesis with positive weight")]
    DegenerateUpdate,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("plot error on {path}: {message}")]
    Plot { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
