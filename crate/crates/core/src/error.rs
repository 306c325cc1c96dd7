use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("agent count must be at least 2, got {0}")]
    TooFewAgents(usize),
    #[error("agent {0} is missing its self-loop")]
    MissingSelfLoop(usize),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("random graph generation failed strong connectivity after {0} attempts")]
    GenerationRetriesExhausted(usize),
    #[error(
        "power iteration did not converge within {0} iterations (matrix may not be primitive)"
    )]
    PowerIterationDiverged(usize),
    #[error("Perron vector has a non-positive entry ({value:.3e} at agent {agent}); input is not strongly connected")]
    DegeneratePerronVector { agent: usize, value: f64 },
    #[error("weight matrix is not column-stochastic: column {column} sums to {sum}")]
    NotColumnStochastic { column: usize, sum: f64 },
    #[error("contraction factor sigma_a = {0} is not in (0,1); weight matrix violates the primitivity assumption")]
    SigmaOutOfRange(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("trigger probability must lie in (0,1], got {0}")]
    InvalidTriggerProbability(f64),
    #[error("label must be +1 or -1, got {0}")]
    InvalidLabel(f64),
    #[error("agent {agent} has an empty local sample set")]
    EmptySampleSet { agent: usize },
    #[error("push-sum weight collapsed to {value:.3e} at agent {agent}, iteration {iter}")]
    PushSumCollapse { agent: usize, iter: u64, value: f64 },
    #[error("reference solution required to evaluate the residual stopping rule")]
    MissingReference,
    #[error("reference solver exceeded {0} iterations")]
    ReferenceSolverDiverged(usize),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
