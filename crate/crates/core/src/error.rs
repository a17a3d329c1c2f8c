use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IddError {
    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergent(String),

    #[error("invalid Lévy measure: {0}")]
    InvalidMeasure(String),

    #[error("no sampler available: {0}")]
    NoSampler(String),

    #[error("k-function oscillates at zero: {0}")]
    Oscillatory(String),

    #[error("refinement did not converge: {0}")]
    NonConvergent(String),

    #[error("|phi| underflows before u = {0}; use the log-modulus route")]
    CfUnderflow(f64),

    #[error("characteristic function is not integrable: {0}")]
    NonIntegrableCf(String),

    #[error("diffusion component present (sigma2 = {0})")]
    DiffusionPresent(f64),

    #[error("support exceeds grid: {0}")]
    GridOverflow(String),

    #[error("|phi| below underflow guard at u = {0}")]
    UnderflowGuard(f64),

    #[error("bandwidth too small: |phi| below guard at u = {0}")]
    BandwidthTooSmall(f64),

    #[error("spectrum clipped by the dyadic partition: relative energy {0:e} beyond ceiling")]
    SpectrumClipped(f64),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, IddError>;
