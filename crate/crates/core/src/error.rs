use thiserror::Error;

/// Errors raised by the bound evaluators, matrix routines and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e} exceeds tolerance {tol:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64, tol: f64 },

    #[error("non-finite matrix entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("invalid matrix shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error(
        "symmetric eigen-solver did not converge on a {dim}x{dim} matrix \
         (max |entry| = {max_abs:e}, frobenius norm = {frobenius:e})"
    )]
    EigenSolver { dim: usize, max_abs: f64, frobenius: f64 },

    #[error("spectral function is not finite at eigenvalue {eigenvalue:e} (returned {value})")]
    SpectralDomain { eigenvalue: f64, value: f64 },

    #[error("intrinsic dimension is undefined for the zero matrix")]
    ZeroMatrix,

    #[error("matrix is not positive semidefinite: lambda_min = {lambda_min:e} below -{tol:e}")]
    NotPsd { lambda_min: f64, tol: f64 },

    #[error("theta = {theta} outside the psi domain [0, {theta_max})")]
    PsiDomain { theta: f64, theta_max: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(
        "exact enumeration refused: n = {n} at dim {dim} needs 2^{n} = {paths} sign patterns \
         (cap is n <= {cap})"
    )]
    EnumerationCap { n: usize, dim: usize, cap: usize, paths: u64 },

    #[error("invalid (variance process, psi) pairing: {0}")]
    Catalog(String),

    #[error("missing conditional moment: {0}")]
    MissingMoment(String),

    #[error("{op} does not support {ensemble}: {reason}")]
    Unsupported { op: &'static str, ensemble: &'static str, reason: String },

    #[error("resource cap exceeded: {0}")]
    Resource(String),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NonFinite { .. } => "non_finite",
            Error::Shape(_) => "shape",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EigenSolver { .. } => "eigen_solver",
            Error::SpectralDomain { .. } => "spectral_domain",
            Error::ZeroMatrix => "zero_matrix",
            Error::NotPsd { .. } => "not_psd",
            Error::PsiDomain { .. } => "psi_domain",
            Error::Parameter(_) => "parameter",
            Error::Precondition(_) => "precondition",
            Error::Internal(_) => "internal",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::Catalog(_) => "catalog",
            Error::MissingMoment(_) => "missing_moment",
            Error::Unsupported { .. } => "unsupported",
            Error::Resource(_) => "resource",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
