use thiserror::Error;

/// Errors raised by the finite element kernel and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid subdivision count: {0}")]
    InvalidSubdivision(String),
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("subdomain not aligned with the mesh: {0}")]
    Alignment(String),
    #[error("degenerate subdomain: {0}")]
    DegenerateSubdomain(String),
    #[error("containment violated: {0}")]
    Containment(String),
    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    Degree(usize),
    #[error("point ({0}, {1}) lies outside the mesh domain")]
    OutOfDomain(f64, f64),
    #[error("empty support for random sample")]
    EmptySupport,
    #[error("empty discrete space: {0}")]
    EmptySpace(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("ellipticity violated: {0}")]
    Ellipticity(String),
    #[error("iteration did not converge: {0}")]
    Convergence(String),
    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("scale error: {0}")]
    Scale(String),
    #[error("scale ordering violated: h = {h} exceeds d = {d}")]
    ScaleOrdering { h: f64, d: f64 },
    #[error("cutoff gap error: {0}")]
    Gap(String),
    #[error("support violation: {0}")]
    Support(String),
    #[error("layer error: {0}")]
    Layer(String),
    #[error("not enough samples: {0}")]
    Samples(String),
    #[error("non-finite data: {0}")]
    Data(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("filesystem error: {0}")]
    Io(String),
    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
