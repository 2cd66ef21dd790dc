use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("adaptive integrator failed to meet tolerance {tol:e} near t = {t}")]
    IntegrationFailure { t: f64, tol: f64 },
    #[error("root not bracketed on [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },
    #[error("least-squares fit ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("no admissible R up to {limit:e} for delta0 = {delta0}")]
    NoAdmissibleR { delta0: f64, limit: f64 },
    #[error("quadrature failure: non-finite integrand at s = {0}")]
    QuadratureFailure(f64),
    #[error("dilation escapes the box: mass fraction {fraction:e} outside |x| <= {bound} exceeds 1e-8")]
    DomainEscape { fraction: f64, bound: f64 },
    #[error("MDFM factorization singular at t = {t}: {which} too close to zero")]
    SingularTime { t: f64, which: &'static str },
    #[error("mass escape: boundary fraction {fraction:e} at t = {t} exceeds {limit:e}")]
    MassEscape { t: f64, fraction: f64, limit: f64 },
    #[error("spectral tail: top-third mass fraction {fraction:e} at t = {t} exceeds {limit:e}")]
    SpectralTail { t: f64, fraction: f64, limit: f64 },
    #[error("blowup detected at t = {t}: sup norm grew by factor {factor:.2}")]
    BlowupDetected { t: f64, factor: f64 },
    #[error("snapshots must arrive in increasing time (got {t} after {prev})")]
    NonMonotoneTime { prev: f64, t: f64 },
    #[error("scattering ladder too short: {got:.2} decades of log t, need {need:.2}")]
    LadderTooShort { got: f64, need: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
