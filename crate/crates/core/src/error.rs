use thiserror::Error;

/// Errors raised while building or solving models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state {state} out of range (n_states = {n_states})")]
    StateOutOfRange { state: usize, n_states: usize },

    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: usize, to: usize },

    #[error("state {0} cannot reach any terminal state")]
    NoTerminalReachable(usize),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear-domain underflow at state {state} (z = {value:e}); retry in the log domain")]
    Underflow { state: usize, value: f64 },

    #[error("model too large for dense elimination: {n} states (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("singular system")]
    Singular,

    #[error("zero normalizer at state {0}")]
    ZeroNormalizer(usize),

    #[error("policy support does not match passive dynamics at state {0}")]
    SupportMismatch(usize),

    #[error("non-positive desirability {value} at state {state}")]
    NonPositive { state: usize, value: f64 },

    #[error("update on terminal state {0}")]
    TerminalUpdate(usize),

    #[error("zero behaviour probability for transition {from} -> {to}")]
    ZeroBehaviour { from: usize, to: usize },

    #[error("unknown action {action} at state {state}")]
    UnknownAction { state: usize, action: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("task graph: {0}")]
    Graph(String),

    #[error("task {task}: {source}")]
    Task {
        task: String,
        #[source]
        source: Box<Error>,
    },

    #[error("absorption not certain at state {state} (row sum {sum})")]
    AbsorptionUncertain { state: usize, sum: f64 },

    #[error("index mismatch: {0} vs {1}")]
    IndexMismatch(usize, usize),

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),

    #[error("non-reproducible run: {0}")]
    NonReproducible(String),
}

impl Error {
    pub(crate) fn in_task(self, task: &str) -> Error {
        Error::Task {
            task: task.to_string(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical kind (convergence, underflow, singularity).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotConverged { .. }
            | Error::Underflow { .. }
            | Error::Singular
            | Error::ZeroNormalizer(_)
            | Error::NonPositive { .. }
            | Error::AbsorptionUncertain { .. }
            | Error::NoTerminalReachable(_) => true,
            Error::Task { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
