use std::fmt;

/// Errors raised by mesh construction, assembly and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate tetrahedron {tet}: {msg}")]
    DegenerateTet { tet: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("field evaluation failed: {0}")]
    Evaluation(String),
    #[error("point {point:?} lies outside the mesh")]
    OutOfDomain { point: [f64; 3] },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("flux is not in the range of the constrained curl (relative residual {residual:.3e})")]
    NotInRange { residual: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("insufficient spectrum: requested {requested} {sign} eigenvalues, found {found}")]
    InsufficientSpectrum {
        sign: Sign,
        requested: usize,
        found: usize,
    },
    #[error("no eigenpair of {0} sign available")]
    MissingEigenpair(Sign),
    #[error("helicity changed sign during descent at iteration {iteration}")]
    SignLoss { iteration: usize },
    #[error("no convergence within {iterations} iterations (gradient ratio {ratio:.3e})")]
    MaxIterations { iterations: usize, ratio: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    /// Stable variant name used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::Parse { .. } => "ParseError",
            Error::DegenerateTet { .. } => "DegenerateTet",
            Error::Io(_) => "IoError",
            Error::Evaluation(_) => "EvaluationError",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::ConstraintViolation(_) => "ConstraintViolation",
            Error::NotInRange { .. } => "NotInRange",
            Error::SolverFailure(_) => "SolverFailure",
            Error::InsufficientSpectrum { .. } => "InsufficientSpectrum",
            Error::MissingEigenpair(_) => "MissingEigenpair",
            Error::SignLoss { .. } => "SignLoss",
            Error::MaxIterations { .. } => "MaxIterations",
            Error::InvalidParams(_) => "InvalidParams",
        }
    }
}

/// Sign of an eigenvalue branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Positive => f.write_str("positive"),
            Sign::Negative => f.write_str("negative"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
