use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain specification: {0}")]
    InvalidSpec(String),
    #[error("mesh quality failure: {0}")]
    MeshQualityFailure(String),
    #[error("mesh invariant violated ({invariant}): {detail}")]
    InvariantViolation { invariant: &'static str, detail: String },
    #[error("parse error in {file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("matrix is singular: {0}")]
    SingularMatrix(String),
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("requested {requested} modes but only {available} are available")]
    RankDeficient { requested: usize, available: usize },
    #[error("degenerate supremizer at index {0}")]
    DegenerateSupremizer(usize),
    #[error("singular Gram matrix: {0}")]
    SingularGram(String),
    #[error("near-singular MER divergence block (sigma_min = {0:.3e})")]
    NearSingularD(f64),
    #[error("pressure stiffness is singular on the pressure basis: {0}")]
    SingularKp(String),
    #[error("energy monitor violated at step {step}: lhs {lhs:.6e} > bound {bound:.6e}")]
    MonitorViolation { step: usize, lhs: f64, bound: f64 },
    #[error("fingerprint mismatch for {what}: expected {expected}, found {found}")]
    FingerprintMismatch { what: String, expected: String, found: String },
    #[error("time grids do not match: {0}")]
    TimeGridMismatch(String),
    #[error("non-positive regression point ({0}, {1})")]
    NonpositivePoint(f64, f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} failed at step {step}: {source}")]
    Step {
        stage: &'static str,
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { file: file.into(), line, msg: msg.into() }
    }

    /// True for failures of the numerical kind (as opposed to configuration or I/O).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Config(_) | Error::InvalidSpec(_) | Error::Io(_) | Error::Parse { .. } | Error::MissingFile(_)
        )
    }
}
