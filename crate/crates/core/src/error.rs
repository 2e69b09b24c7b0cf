use thiserror::Error;

use crate::pulseprog::Diagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown spin label `{0}`")]
    UnknownSpin(String),

    #[error("register is missing required spins: {0:?}")]
    MissingSpins(Vec<String>),

    #[error("target `{0}` selects no spins in this register")]
    EmptyTarget(String),

    #[error("selection of spins to keep is empty")]
    EmptySelection,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid molecule: {0}")]
    InvalidSystem(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size {dt:e} s violates the guard dt * max_rate <= {limit} (max rate {rate} 1/s)")]
    StepSizeGuard { dt: f64, rate: f64, limit: f64 },

    #[error("no spectral bins fall inside the window around {center} rad/s")]
    EmptyWindow { center: f64 },

    #[error("integration windows overlap")]
    OverlappingWindows,

    #[error("degenerate fit input: {0}")]
    DegenerateFit(String),

    #[error("{0}")]
    Register(String),

    #[error("pulse program rejected with {} diagnostic(s)", .0.len())]
    Parse(Diagnostics),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
