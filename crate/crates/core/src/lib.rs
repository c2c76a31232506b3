//! Secrecy capacity of the n-dimensional amplitude-constrained Gaussian
//! wiretap channel: closed-form low-amplitude capacity, a KKT-validated
//! shell-pmf optimizer beyond that regime, large-n asymptotics, scalar
//! support-size bounds, and Monte Carlo cross-checks.

pub mod bounds;
pub mod density;
pub mod mc_oracle;
pub mod model;
pub mod optimizer;
pub mod quad;
pub mod regime;
pub mod specfun;

pub use model::{
    ChannelParams, ModelError, QuadratureConfig, ShellPmf, SolverReport, UnitMode,
};

use thiserror::Error;

/// Unified error type for all numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: residual {residual} after {subdivisions} subdivisions")]
    QuadratureNonConvergence { residual: f64, subdivisions: u32 },
    #[error("bracketing failed: no sign change up to {limit}")]
    BracketFailure { limit: f64 },
    #[error("radius {radius} exceeds the low-amplitude threshold {r_bar}")]
    OutsideLowAmplitudeRegime { radius: f64, r_bar: f64 },
    #[error("closed form exists only for norm 0 or R, got {0}")]
    UnsupportedNorm(f64),
    #[error("noise gap sigma2_sq - sigma1_sq = {0} is numerically degenerate")]
    DegenerateGap(f64),
    #[error("support grew past {0} mass points without KKT validity")]
    TooManyPoints(usize),
    #[error("optimizer failed to reach a valid KKT certificate in {0} escalations")]
    NonConvergence(u32),
    #[error("scalar-case bound requires n = 1, got n = {0}")]
    NotScalar(u32),
}

pub type Result<T> = std::result::Result<T, Error>;
