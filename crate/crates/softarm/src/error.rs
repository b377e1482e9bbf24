use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: configuration problems exit with 2,
/// missing dependencies and hash mismatches with 3, numerical divergence with 4,
/// everything else with 1.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration or argument values.
    Config(String),
    /// Tensor or buffer shape disagreement.
    Shape(String),
    /// Simulation state became non-finite.
    Diverged { node: usize, t: f64 },
    /// Element endpoints are coincident; the axial direction is undefined.
    DegenerateElement { a: usize, b: usize },
    /// A mesh cell inverted or collapsed during rendering.
    DegenerateCell { row: usize, col: usize },
    /// Training loss became non-finite.
    TrainingDiverged(String),
    /// A stage input artifact is missing or unreadable.
    MissingDependency(String),
    /// Artifact or manifest hash does not match the active configuration.
    HashMismatch(String),
    /// Malformed container, checkpoint, or manifest file.
    Format(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Diverged { node, t } => {
                write!(f, "simulation diverged: node {node} non-finite at t = {t:.6} s")
            }
            Error::DegenerateElement { a, b } => {
                write!(f, "degenerate element: nodes {a} and {b} are coincident")
            }
            Error::DegenerateCell { row, col } => {
                write!(f, "degenerate cell at row {row}, col {col}: inverted or collapsed")
            }
            Error::TrainingDiverged(msg) => write!(f, "training diverged: {msg}"),
            Error::MissingDependency(msg) => write!(f, "missing dependency: {msg}"),
            Error::HashMismatch(msg) => write!(f, "hash mismatch: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 2,
            Error::MissingDependency(_) | Error::HashMismatch(_) => 3,
            Error::Diverged { .. } | Error::TrainingDiverged(_) => 4,
            _ => 1,
        }
    }
}
