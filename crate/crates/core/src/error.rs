use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),

    #[error("non-symmetric stiffness matrix (relative defect {0:.3e})")]
    NonSymmetric(f64),

    #[error("nonpositive density")]
    NonPositiveDensity,

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("matrix is not a proper rotation (defect {0:.3e})")]
    NotRotation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pencil is not elliptic (spectral margin {0:.3e})")]
    NotElliptic(f64),

    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),

    #[error("quadrature did not converge (relative change {0:.3e})")]
    QuadratureNonConvergence(f64),

    #[error("spectral factor residuals too large (solvency {solvency:.3e}, factorization {factorization:.3e})")]
    FactorResidual { solvency: f64, factorization: f64 },

    #[error("impedance hermiticity defect {0:.3e} exceeds tolerance")]
    Hermiticity(f64),

    #[error("singular Sylvester system (spectral separation {0:.3e})")]
    SingularSylvester(f64),

    #[error("limiting-speed bracket failure: {0}")]
    Bracket(String),

    #[error("no Rayleigh root along direction")]
    NoRoot,

    #[error("kernel sampling inadequate (minimum overlap {0:.3})")]
    SamplingInadequate(f64),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::NonSymmetric(_) => "nonsymmetric",
            Error::NonPositiveDensity => "nonpositive_density",
            Error::DegenerateFrame(_) => "degenerate_frame",
            Error::NotRotation(_) => "not_rotation",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotElliptic(_) => "not_elliptic",
            Error::EigenFailure(_) => "eigen_failure",
            Error::QuadratureNonConvergence(_) => "quadrature",
            Error::FactorResidual { .. } => "factor_residual",
            Error::Hermiticity(_) => "hermiticity",
            Error::SingularSylvester(_) => "singular_sylvester",
            Error::Bracket(_) => "bracket",
            Error::NoRoot => "no_root",
            Error::SamplingInadequate(_) => "sampling",
        }
    }

    /// Whether the error stems from caller input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::NonSymmetric(_)
                | Error::NonPositiveDensity
                | Error::DegenerateFrame(_)
                | Error::NotRotation(_)
                | Error::InvalidParameter(_)
        )
    }
}
