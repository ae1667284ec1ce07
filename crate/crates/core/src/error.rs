use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-manifold edge ({0}, {1}) is shared by more than two faces")]
    NonManifold(usize, usize),

    #[error("face {face} is degenerate: {reason}")]
    DegenerateFace { face: usize, reason: &'static str },

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("mesh is disconnected: vertex {vertex} is unreachable from vertex {from}")]
    Disconnected { from: usize, vertex: usize },

    #[error("solver did not converge: relative residual {residual:e} after {iterations} refinement steps")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("rank deficient system: relative pivot {pivot:e} at unknown {index}")]
    RankDeficient { pivot: f64, index: usize },

    #[error("alignment failed: mean displacement {mean_displacement:.2} px exceeds {limit:.2} px")]
    AlignmentFailure {
        mean_displacement: f64,
        limit: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed (inputs {digest}): {source}")]
    Stage {
        stage: &'static str,
        digest: String,
        #[source]
        source: Box<Error>,
    },

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 2 validation, 3 numerical, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::NonConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::AlignmentFailure { .. }
            | Error::DegenerateFace { .. } => 3,
            Error::Io { .. } | Error::Image(_) | Error::Format { .. } => 4,
            Error::NonManifold(..)
            | Error::Shape { .. }
            | Error::Argument(_)
            | Error::Disconnected { .. }
            | Error::Config(_) => 2,
        }
    }
}
