use std::path::Path;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Input {
        path: String,
        line: Option<usize>,
        message: String,
    },
    #[error("solver: {0}")]
    Solver(#[from] murraynet_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(path: impl AsRef<Path>, line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.as_ref().display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Input { .. } | CliError::Io { .. } => "InputError",
            CliError::Solver(_) => "SolverError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input { .. } | CliError::Io { .. } => 3,
            CliError::Solver(_) => 4,
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Input { path, line, .. } => {
                v["path"] = json!(path);
                v["line"] = json!(line);
            }
            CliError::Io { path, .. } => v["path"] = json!(path),
            CliError::Solver(e) => v["detail"] = json!(format!("{e:?}")),
            CliError::Config(_) => {}
        }
        v
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
