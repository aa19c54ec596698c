use thiserror::Error;

/// Errors raised by the toolkit. Every message starts with the module that
/// produced it so front ends can report the origin without extra context.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{module}: invalid input: {msg}")]
    InvalidInput { module: &'static str, msg: String },

    #[error("uncertainty: unsupported norm `{0}`")]
    UnsupportedNorm(String),

    #[error("robust_sdp: unsupported uncertainty: {0}")]
    UnsupportedUncertainty(String),

    #[error("baselines: zf infeasible: T < K (T = {antennas}, K = {users})")]
    ZfInfeasible { antennas: usize, users: usize },

    #[error("conic: solver failure: {0}")]
    Solver(String),

    #[error("experiments: {0}")]
    Experiment(String),
}

impl Error {
    pub(crate) fn invalid(module: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidInput {
            module,
            msg: msg.into(),
        }
    }

    /// Name of the module the error originated from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidInput { module, .. } => module,
            Error::UnsupportedNorm(_) => "uncertainty",
            Error::UnsupportedUncertainty(_) => "robust_sdp",
            Error::ZfInfeasible { .. } => "baselines",
            Error::Solver(_) => "conic",
            Error::Experiment(_) => "experiments",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
