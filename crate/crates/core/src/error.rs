use std::path::PathBuf;

use thiserror::Error;

use crate::timestep::StepReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {0} lies outside [0, 1]")]
    Domain(f64),

    #[error("point ({0}, {1}) lies outside the physical domain")]
    OutsideDomain(f64, f64),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error(
        "Newton iteration did not converge after {} iterations (|R| = {:.3e}, rel = {:.3e})",
        .0.iterations, .0.abs_residual, .0.rel_residual
    )]
    NotConverged(Box<StepReport>),

    #[error("mesh adaptation did not settle after {0} refinement passes")]
    AdaptationLimit(usize),

    #[error("error metric undefined: reference field has zero L2 norm")]
    UndefinedMetric,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
