use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

/// Failure of one CLI run, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line or configuration (exit 2).
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Error raised by a solver; the exit code depends on its kind.
    #[error(transparent)]
    Core(#[from] mfg_pow::Error),

    /// Reading or writing a file failed (exit 4).
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use mfg_pow::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                E::InvalidParam { .. } | E::InvalidGrid(_) | E::GridMismatch(_) => 2,
                E::Io(_) | E::Parse { .. } => 4,
                _ => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "solver",
            _ => "io",
        }
    }

    /// Machine-readable error record printed on stderr.
    pub fn record(&self) -> Value {
        let mut rec = json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config { path, .. } => rec["path"] = json!(path),
            CliError::Io { path, .. } => rec["path"] = json!(path.display().to_string()),
            CliError::Core(mfg_pow::Error::InvalidParam { field, .. }) => {
                rec["field"] = json!(field)
            }
            CliError::Core(mfg_pow::Error::Parse { line, .. }) => rec["line"] = json!(line),
            CliError::Core(_) => {}
        }
        json!({ "error": rec })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(CliError::config("model.r", "bad").exit_code(), 2);
        let e: CliError = mfg_pow::Error::NoConvergence {
            iterations: 3,
            residual: 1.0,
        }
        .into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = mfg_pow::Error::Parse {
            line: 4,
            message: "x".into(),
        }
        .into();
        assert_eq!(e.exit_code(), 4);
        assert_eq!(e.record()["error"]["line"], 4);
    }
}
