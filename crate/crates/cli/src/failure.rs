use std::fmt;

use respiro::audio::AudioError;
use respiro::augment::AugmentError;
use respiro::dataset::DatasetError;
use respiro::features::FeatureError;
use respiro::nn::{CheckpointError, NnError};
use respiro::trainer::{ReportParseError, TrainerError};

/// A failed command, classified by process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Invalid flags or option values (exit 1).
    Usage(String),
    /// Unreadable, malformed or inconsistent input files (exit 2).
    Data(String),
    /// A numeric check failed or training diverged (exit 3).
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric check failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Fractions(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<AudioError> for Failure {
    fn from(e: AudioError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Config(_) => Failure::Usage(e.to_string()),
            FeatureError::TooShort { .. } => Failure::Data(e.to_string()),
        }
    }
}

impl From<AugmentError> for Failure {
    fn from(e: AugmentError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ReportParseError> for Failure {
    fn from(e: ReportParseError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<NnError> for Failure {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Config(_) => Failure::Usage(e.to_string()),
            NnError::NonFinite => Failure::Numeric(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<TrainerError> for Failure {
    fn from(e: TrainerError) -> Self {
        match e {
            TrainerError::Config(_) => Failure::Usage(e.to_string()),
            TrainerError::Diverged { .. } => Failure::Numeric(e.to_string()),
            TrainerError::Nn(inner) => inner.into(),
            TrainerError::Empty(_) => Failure::Data(e.to_string()),
        }
    }
}

/// I/O failure on `path`, reported as a data error.
pub fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}
