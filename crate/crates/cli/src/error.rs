use thiserror::Error;

use elcc_core::accreditation::AccreditationError;
use elcc_core::reliability::ReliabilityError;
use elcc_core::uc::UcError;

/// Failure of a command, tagged with the stage that produced it.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Ingest { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Solver { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    NonBracketable { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Other { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingest { .. } => 3,
            CliError::Solver { .. } => 4,
            CliError::NonBracketable { .. } => 5,
            CliError::Other { .. } => 1,
        }
    }

    pub fn ingest(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Ingest {
            stage,
            message: e.to_string(),
        }
    }

    pub fn other(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Other {
            stage,
            message: e.to_string(),
        }
    }

    pub fn from_uc(stage: &'static str, e: UcError) -> Self {
        let message = e.to_string();
        match e {
            UcError::Solve { .. } => CliError::Solver { stage, message },
            UcError::MissingSite { .. } | UcError::BadParams(_) => CliError::Config(message),
            _ => CliError::Ingest { stage, message },
        }
    }

    pub fn from_reliability(stage: &'static str, e: ReliabilityError) -> Self {
        let message = e.to_string();
        match e {
            ReliabilityError::NonBracketable { .. } => CliError::NonBracketable { stage, message },
            ReliabilityError::Uc(u) => match CliError::from_uc(stage, u) {
                CliError::Config(_) => CliError::Config(message),
                other => other.with_message(message),
            },
            ReliabilityError::BadTarget(_) | ReliabilityError::BadEpsilon(_) => CliError::Config(message),
            ReliabilityError::Variant { source, .. } => {
                CliError::from_reliability(stage, *source).with_message(message)
            }
            _ => CliError::Other { stage, message },
        }
    }

    pub fn from_accreditation(stage: &'static str, e: AccreditationError) -> Self {
        let message = e.to_string();
        match e {
            AccreditationError::Variant { source, .. } => {
                CliError::from_reliability(stage, source).with_message(message)
            }
            AccreditationError::UnknownResource(_)
            | AccreditationError::DuplicateResource(_)
            | AccreditationError::NoResources => CliError::Config(message),
            _ => CliError::Other { stage, message },
        }
    }

    fn with_message(self, message: String) -> Self {
        match self {
            CliError::Config(_) => CliError::Config(message),
            CliError::Ingest { stage, .. } => CliError::Ingest { stage, message },
            CliError::Solver { stage, .. } => CliError::Solver { stage, message },
            CliError::NonBracketable { stage, .. } => CliError::NonBracketable { stage, message },
            CliError::Other { stage, .. } => CliError::Other { stage, message },
        }
    }
}
