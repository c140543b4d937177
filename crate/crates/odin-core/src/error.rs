use thiserror::Error;

/// Errors surfaced by the engine. Operations that have a documented
/// fallback (model lifecycle, metadata loading) catch these internally.
#[derive(Debug, Error)]
pub enum OdinError {
    #[error("ingest error at line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error("empty graph")]
    EmptyGraph,

    #[error("entity not found: {0}")]
    EntityNotFound(String),

    #[error("relation not found: {0}")]
    RelationNotFound(String),

    #[error("not an observed edge: ({s}, {r}, {o})")]
    NotObservedEdge { s: String, r: String, o: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("load error: {0}")]
    Load(String),

    #[error("veto path has no finite log decomposition; vetoed by: {0}")]
    VetoedPath(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OdinError>;
