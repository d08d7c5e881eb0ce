use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{quantity} is outside its domain: {value}")]
    Domain { quantity: &'static str, value: f64 },

    #[error("membrane thickness must be positive, got {t_mem} cm")]
    DegenerateMembrane { t_mem: f64 },

    #[error(
        "no sign change of the voltage residual in [{lo}, {hi}] V \
         (residuals {f_lo:e} and {f_hi:e})"
    )]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("voltage solve did not converge after {iterations} iterations (last residual {residual:e} V)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no positive real root for peroxide balance A={a:e}, B={b:e}, C={c:e}")]
    ChemistryInfeasible { a: f64, b: f64, c: f64 },

    #[error("membrane vanished at t = {time} h")]
    MembraneVanished { time: f64 },

    #[error("voltage solve failed at t = {time} h: {source}")]
    VoltageSolve {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("missing input file {}", path.display())]
    MissingInput { path: PathBuf },

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::MissingInput { .. } => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::MissingColumn { .. } => 4,
            _ => 3,
        }
    }
}
