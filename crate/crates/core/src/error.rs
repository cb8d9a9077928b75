use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory shape mismatch: expected {expected_states} states and {expected_controls} controls, got {states} and {controls}")]
    Shape {
        expected_states: usize,
        expected_controls: usize,
        states: usize,
        controls: usize,
    },

    #[error("policy has {policy} stages but the problem horizon is {horizon}")]
    HorizonMismatch { policy: usize, horizon: usize },

    #[error("control {control} is not admissible at stage {stage}")]
    InfeasibleControl { stage: usize, control: String },

    #[error("policy is undefined at stage {stage} for state {state}")]
    UndefinedPolicy { stage: usize, state: String },

    #[error("trajectory infeasible at stage {stage}: {kind}")]
    InfeasibleTrajectory { stage: usize, kind: String },

    #[error("state {state} at stage {stage} is not in the enumerated state space")]
    UnknownState { stage: usize, state: String },

    #[error("control set at stage {stage} cannot be enumerated")]
    NotEnumerable { stage: usize },

    #[error("control set at stage {stage} has no box bounds")]
    NoControlBounds { stage: usize },

    #[error("brute force would enumerate about {estimate} sequences (cap {cap})")]
    CapExceeded { estimate: f64, cap: f64 },

    #[error("incumbent control {incumbent} is missing from the candidate set at stage {stage}")]
    IncumbentExcluded { stage: usize, incumbent: String },

    #[error("candidate {candidate} at stage {stage} is not admissible")]
    InfeasibleCandidate { stage: usize, candidate: String },

    #[error("every candidate of coordinate {coordinate} at stage {stage} was rejected by the membership test")]
    EmptyCoordinateSet { stage: usize, coordinate: usize },

    #[error("generated policy is inconsistent at stage {stage}: expected {expected}, got {actual}")]
    ConsistencyViolation {
        stage: usize,
        expected: String,
        actual: String,
    },

    #[error("regressor training diverged at epoch {epoch} (loss {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
