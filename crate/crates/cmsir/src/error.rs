use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no susceptibles in population")]
    NoSusceptibles,
    #[error("not a distribution: {0}")]
    NotADistribution(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("degenerate profile: mean degree is zero")]
    DegenerateProfile,
    #[error("no interior root / no major outbreak (R0 <= 1 with mu_I = 0)")]
    NoMajorOutbreak,
    #[error("threshold outside (v_S(theta_inf), alpha_S): s0 = {s0}")]
    ThresholdOutsideRange { s0: f64 },
    #[error("infective pressure undefined at theta = 0")]
    InfectivePressureAtZero,
    #[error("population failed validation: {0}")]
    Validation(String),
    #[error("stiff/degenerate configuration: {0}")]
    SolverStalled(String),
    #[error("Picard did not converge after {iterations} iterations (last residual {residual})")]
    PicardDiverged { iterations: usize, residual: f64 },
    #[error("unreachable threshold: s0 = {s0} outside (0, {alpha_s_hat})")]
    UnreachableThreshold { s0: f64, alpha_s_hat: f64 },
    #[error("no alignment point: T_* = infinity for this trajectory")]
    NoAlignmentPoint,
    #[error("no major outbreaks observed: every replica had T_* = infinity")]
    NoOutbreaksObserved,
    #[error("degenerate configuration: {0}")]
    DegenerateConfig(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
