use std::path::PathBuf;

/// Errors surfaced by the factory stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("schema violation in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("{context}:{line}: {message}")]
    Line {
        context: String,
        line: usize,
        message: String,
    },

    #[error("bundle invariants violated: {}", .0.join("; "))]
    Invariant(Vec<String>),

    #[error("unknown page: {0}")]
    UnknownPage(String),

    #[error("site mismatch: task targets {task_site}, bundle is {bundle_site}")]
    SiteMismatch { task_site: String, bundle_site: String },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("unsatisfiable task {task_id}: {reason}")]
    Unsatisfiable { task_id: String, reason: String },

    #[error("site version mismatch: trajectory recorded on v{recorded}, bundle is v{bundle}")]
    VersionMismatch { recorded: u64, bundle: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("determinism violation: {0}")]
    Determinism(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
