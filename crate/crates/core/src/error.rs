use thiserror::Error;

/// Errors raised by the cone library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvalue 0 missing from cross-section spectrum")]
    MissingZeroEigenvalue,

    #[error("positive eigenvalue {0} in cross-section spectrum")]
    PositiveEigenvalue(f64),

    #[error("duplicate eigenvalue {0} in cross-section spectrum")]
    DuplicateEigenvalue(f64),

    #[error("spectrum has no nonzero eigenvalue")]
    NoNonzeroEigenvalue,

    #[error("spectrum cutoff l_max={l_max} is too small to certify the strip [{re_min}, {re_max})")]
    IncompleteSpectrum { l_max: usize, re_min: f64, re_max: f64 },

    #[error("fit window is degenerate: {0}")]
    DegenerateWindow(String),

    #[error("field below noise floor on fit window (max |f| = {0:e})")]
    BelowNoiseFloor(f64),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("eigensolver did not converge after {0} iterations")]
    EigenNoConvergence(usize),

    #[error("Newton iteration diverged at t={t}: residual {residual:e}")]
    NewtonDivergence { t: f64, residual: f64 },

    #[error("positivity lost at t={t}: min value {min:e}")]
    PositivityLoss { t: f64, min: f64 },

    #[error("step-size instability at t={t}: norm grew by factor {factor:e}")]
    Instability { t: f64, factor: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time stamps do not match: {0}")]
    TimeMismatch(String),

    #[error("forcing norm {0:e} below 1e-14; remainder bound is vacuous")]
    VacuousBound(f64),

    #[error("singular resolvent at lambda = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("spectrum of A + c intersects the sector (min eigenvalue {0:e})")]
    SpectrumInSector(f64),

    #[error("amplified round-off at power k={k}: estimate {estimate:e} exceeds computed norm {norm:e}")]
    AmplifiedRoundoff { k: usize, estimate: f64, norm: f64 },

    #[error("window search did not reach eps={eps:e}; best norm {best:e}")]
    WindowSearchFailed { eps: f64, best: f64 },
}

pub type Result<T> = std::result::Result<T, ConeError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConeError::InvalidInput(msg.into()))
}
