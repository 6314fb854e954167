use thiserror::Error;

/// Errors raised by mesh construction, geometry evaluation and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid mesh: {0}")]
    Topology(String),

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("time {t} outside the motion horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("adaptive quadrature did not reach tolerance {tol:e} within depth {depth}")]
    Tolerance { tol: f64, depth: u32 },

    #[error("flux has no stream-function representation; exact curved fluxes unavailable")]
    UnsupportedFlux,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite value in cell {cell} at step {step}")]
    BlowUp { cell: usize, step: usize },

    #[error("need at least {needed} refinement levels, got {got}")]
    TooFewLevels { needed: usize, got: usize },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
