use merlang_core::Error as CoreError;
use std::process::ExitCode;

/// Failure classes of a harness run, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical oracle failed: {0}")]
    Oracle(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => ExitCode::from(2),
            HarnessError::Oracle(_) => ExitCode::from(3),
        }
    }

    /// Classifies a core error raised while computing: bad parameters are a
    /// configuration problem, everything else an oracle failure.
    pub fn from_core(context: &str, e: CoreError) -> HarnessError {
        match e {
            CoreError::InvalidParameter(msg) => HarnessError::Config(format!("{context}: {msg}")),
            other => HarnessError::Oracle(format!("{context}: {other}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for merlang_core::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|e| HarnessError::from_core(what, e))
    }
}
