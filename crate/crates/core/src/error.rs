use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric (max |A - A^t| = {max_asym:e})")]
    NotSymmetric { max_asym: f64 },
    #[error("imaginary part is not positive definite (smallest eigenvalue {min_eig:e})")]
    ImNotPositiveDefinite { min_eig: f64 },
    #[error("real part is not positive definite (smallest eigenvalue {min_eig:e})")]
    ReNotPositiveDefinite { min_eig: f64 },
    #[error("index matrix is not positive definite")]
    IndexNotPositiveDefinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("C*Omega + D is numerically singular (condition number {cond:e})")]
    SingularJ { cond: f64 },
    #[error("Omega is numerically singular (condition number {cond:e})")]
    SingularOmega { cond: f64 },
    #[error("argument leaves the right half domain: {0}")]
    DomainViolation(String),
    #[error("matrix is not symplectic (residual {residual:e})")]
    NotSymplectic { residual: f64 },
    #[error("kappa + mu * lambda^t is not symmetric (residual {residual:e})")]
    HeisenbergNotSymmetric { residual: f64 },
    #[error("sheet label violates eps^2 = alpha(g)^-1 (residual {residual:e})")]
    InvalidSheet { residual: f64 },
    #[error("index degree m = {m} must be odd")]
    EvenM { m: usize },
    #[error("index matrices differ between the element and the action")]
    IndexMismatch,
    #[error("grid too coarse: boundary mass {boundary:e} above threshold")]
    GridTooCoarse { boundary: f64 },
    #[error("lattice truncation radius exceeds cap {cap} (needed {needed:?})")]
    RadiusCapExceeded { needed: Option<usize>, cap: usize },
    #[error("generator parameters must be integral: {0}")]
    NonIntegralParams(String),
    #[error("translation b must have even diagonal")]
    OddDiagonalB,
    #[error("theta vanishes numerically at every probe point")]
    ThetaNearZero,
    #[error("index matrix must be unimodular (det = {det})")]
    NonUnimodularM { det: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
