use std::process::ExitCode;

use ragatr_core::eval::EvalError;
use ragatr_core::index::SnapshotError;
use ragatr_core::ingest::IngestError;
use ragatr_core::projection::ProjectionError;
use ragatr_core::rag::RagError;
use ragatr_core::IndexError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration.
    #[error("{0}")]
    Usage(String),
    /// Inputs that fail to parse or validate, or operations the data cannot satisfy.
    #[error("{0}")]
    Data(String),
    /// Failures not attributable to the user's inputs.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Data(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(IngestError, IndexError, SnapshotError, ProjectionError, RagError);

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(format!("[{}] {e}", e.stage())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_by_class() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Data("x".into()).exit_code(), 1);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 2);
        let e: CliError = EvalError::UnknownType("BTR-70".into()).into();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().starts_with("[specs]"));
    }
}
