use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not diagonalizable to working accuracy ({reason}); supply an explicit Jordan factorization")]
    NonDiagonalizable { reason: String },

    #[error("invalid Jordan factorization: {0}")]
    InvalidJordan(String),

    #[error("derivative of order {order} unavailable for stem {stem} (cap {cap})")]
    DerivativeUnavailable { stem: &'static str, order: usize, cap: usize },

    #[error("stem {stem} is singular at eigenvalue {at}")]
    StemSingular { stem: &'static str, at: Complex64 },

    #[error("imaginary residue {residue:.3e} exceeds tolerance {tol:.1e}")]
    ImaginaryResidue { residue: f64, tol: f64 },

    #[error("exponent root {root} violates 0 < Re(h) < 1")]
    RootOutOfRange { root: Complex64 },

    #[error("exponent has a root with real part 1/2; time-domain parameters are undefined")]
    HalfRoot,

    #[error("operation requires exponent H = I/2")]
    WrongExponent,

    #[error("conversion matrix {which} is singular")]
    SingularConversion { which: &'static str },

    #[error("model is not an operator Brownian motion")]
    NotObm,

    #[error("quadrature tolerance not met: achieved {achieved:.3e}, target {target:.3e}")]
    ToleranceNotMet { achieved: f64, target: f64 },

    #[error("root {root} outside the long-range-dependence range 1/2 < Re(h) < 1")]
    LrdRange { root: Complex64 },

    #[error("entry ({i}, {j}) is neither identically zero nor growing near the origin")]
    AmbiguousEntry { i: usize, j: usize },

    #[error("covariance matrix is not positive semidefinite (jitter cap {cap:.3e} exceeded)")]
    CovarianceNotPsd { cap: f64 },

    #[error("time {time} is not on the ensemble grid")]
    GridMiss { time: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ToleranceNotMet { .. }
            | Error::AmbiguousEntry { .. }
            | Error::CovarianceNotPsd { .. }
            | Error::ImaginaryResidue { .. } => 2,
            _ => 1,
        }
    }
}
