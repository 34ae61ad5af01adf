use std::path::PathBuf;

use ellopt_core::ControlField;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Core(#[from] ellopt_core::Error),
    #[error("improver raised the cost in round {round}: {before:e} -> {after:e} with {switched} switched elements")]
    NotMonotone { round: usize, before: f64, after: f64, switched: usize },
    #[error("improver cycles with period {period}")]
    Oscillation { period: usize, previous: Box<ControlField>, current: Box<ControlField> },
    #[error("stage {stage} failed: {message}")]
    StageFailed { stage: String, message: String },
    #[error("optimality violation {violation:e} exceeds {tolerance:e}")]
    Violation { violation: f64, tolerance: f64 },
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } => 2,
            Self::Core(ellopt_core::Error::InvalidArgument(_)) => 2,
            Self::Violation { .. } => 4,
            Self::Io { .. } | Self::Output(_) => 1,
            _ => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| Self::Io { context, source }
    }
}
