use std::path::PathBuf;

/// Errors produced anywhere in the pruning stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("backward already ran on this graph")]
    BackwardTwice,

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),

    #[error("schedule step {step} outside 0..={total}")]
    StepOutOfRange { step: usize, total: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("layer {layer} would retain no units")]
    EmptyLayer { layer: usize },

    #[error("pruning ratio {ratio} is infeasible for {units} units across {layers} layers")]
    InfeasibleRatio {
        ratio: f64,
        units: usize,
        layers: usize,
    },

    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("need {needed} eligible neighbour records, found {found}")]
    NotEnoughNeighbors { needed: usize, found: usize },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("record {0} not found in pool")]
    MissingRecord(u64),

    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(PathBuf),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("no pool at {0}")]
    MissingPool(PathBuf),

    #[error("infeasible task sampling: {0}")]
    InfeasibleTasks(String),

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::BackwardTwice => "backward_twice",
            Error::NonScalarLoss(_) => "non_scalar_loss",
            Error::InvalidLearningRate(_) => "invalid_learning_rate",
            Error::StepOutOfRange { .. } => "step_out_of_range",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::EmptyLayer { .. } => "empty_layer",
            Error::InfeasibleRatio { .. } => "infeasible_ratio",
            Error::ArchMismatch(_) => "arch_mismatch",
            Error::InvalidArchitecture(_) => "invalid_architecture",
            Error::EmptyInput(_) => "empty_input",
            Error::KOutOfRange { .. } => "k_out_of_range",
            Error::NotEnoughNeighbors { .. } => "not_enough_neighbors",
            Error::InvalidRecord(_) => "invalid_record",
            Error::MissingRecord(_) => "missing_record",
            Error::ChecksumMismatch(_) => "checksum_mismatch",
            Error::Format { .. } => "format",
            Error::MissingPool(_) => "missing_pool",
            Error::InfeasibleTasks(_) => "infeasible_tasks",
            Error::Diverged { .. } => "diverged",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownScenario(_) => "unknown_scenario",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
