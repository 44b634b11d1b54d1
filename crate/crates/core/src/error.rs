use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is empty")]
    Empty,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("density matrix trace is {trace}, expected 1")]
    TraceNotUnit { trace: f64 },

    #[error("density matrix has eigenvalue {min_eigenvalue:.3e} below the floor {floor:.3e}")]
    PositivityViolation { min_eigenvalue: f64, floor: f64 },

    #[error("imaginary residue {residue:.3e} in expectation value (non-Hermitian input?)")]
    ImaginaryResidue { residue: f64 },

    #[error("eigensolver did not converge")]
    EigenNonConvergence,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("bath energy {energy} outside the entropy-curve domain [{lo}, {hi}]")]
    OutOfDomain { energy: f64, lo: f64, hi: f64 },

    #[error("entropy curve slope {slope} at energy {energy} is not positive (temperature undefined)")]
    NonPositiveSlope { energy: f64, slope: f64 },

    #[error("projection displacement {displacement:.3e} exceeds limit {limit:.3e}; integration too coarse")]
    ProjectionDisplacement { displacement: f64, limit: f64 },

    #[error("eigenvalue {min_eigenvalue:.3e} collapsed below -{tolerance:.1e} before projection")]
    PositivityCollapse { min_eigenvalue: f64, tolerance: f64 },

    #[error("adaptive step size fell below {min_step:.1e} at t = {time}")]
    StepRejectionCascade { time: f64, min_step: f64 },

    #[error("tabulated entropy curve: {0}")]
    Table(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
