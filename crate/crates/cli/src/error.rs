use std::fmt;

use ifl_core::enumerate::EnumError;
use ifl_core::formats::FormatError;
use ifl_core::model::ModelError;
use ifl_core::sweep::SweepError;
use ifl_core::tensor::TensorError;
use ifl_core::analytics::AnalyticsError;

/// Failure classes mapped to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Resource,
    Format,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Usage => 2,
            Self::Resource => 3,
            Self::Format => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Usage,
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Format,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<EnumError> for CliError {
    fn from(e: EnumError) -> Self {
        let kind = if e.is_resource_guard() { Kind::Resource } else { Kind::Usage };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Io { .. } => Self::format(e.to_string()),
            other => Self::usage(other.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::format(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        Self::usage(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Writes a file, reporting failures as file errors.
pub fn write_file(path: &std::path::Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::format(format!("cannot write {}: {e}", path.display())))
}
