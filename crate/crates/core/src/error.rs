//! Error type shared by every layer of the crate.

use thiserror::Error;

use crate::system::SolutionState;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("non-finite samples in {context}")]
    NonFinite { context: &'static str },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample point {point:.6} outside the spectral band |xi| <= {band:.6}")]
    OutOfBand { point: f64, band: f64 },

    #[error("numerical blow-up or instability at t = {time}")]
    BlowUp {
        time: f64,
        last_good: Box<SolutionState>,
    },

    #[error(
        "boundary mass fraction {fraction:.3e} exceeded threshold {threshold:.3e} at t = {time}; \
         the periodic box no longer approximates the real line"
    )]
    BoundaryMass {
        time: f64,
        fraction: f64,
        threshold: f64,
        last_good: Box<SolutionState>,
    },

    #[error("oscillatory constant did not stabilize: relative change {change:.3e} across a probe-time doubling")]
    NoConvergence { change: f64 },

    #[error("phase unwrapping failed: jump of {jump:.3} rad between consecutive snapshots")]
    PhaseUnwrap { jump: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("not enough samples: need {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;
