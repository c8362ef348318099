use thiserror::Error;

use crate::geometry::Velocity;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge: estimate {estimate:e}, achieved error {error:e}, requested {requested:e}")]
    Quadrature { estimate: f64, error: f64, requested: f64 },

    #[error("coincident velocities {0} with an unregularized singular kernel")]
    Coincident(Velocity),

    #[error("non-finite velocity after event {event}: {detail}")]
    NonFinite { event: u64, detail: String },

    #[error("conservation breach at t={t}: momentum drift {momentum_drift:e}, energy drift {energy_drift:e}")]
    Conservation { t: f64, momentum_drift: f64, energy_drift: f64 },

    #[error("{0}")]
    Estimator(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
