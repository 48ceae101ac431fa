use std::io;
use std::path::PathBuf;

use driftmle::model::AssumptionId;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or model text. `field` is the dotted config
    /// path when one applies.
    #[error("{}{message}", field.as_deref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Config { field: Option<String>, message: String },
    #[error(
        "assumption check failed for {}; rerun with --force to proceed anyway\n{report}",
        join_ids(failed)
    )]
    Assumption { failed: Vec<AssumptionId>, report: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn join_ids(ids: &[AssumptionId]) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(", ")
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config {
            field: Some(field.into()),
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl ToString) -> Self {
        CliError::Config {
            field: None,
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 config (and I/O), 2 assumption failure, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 1,
            CliError::Assumption { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Assumption { .. } => "assumption",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config { field: Some(f), .. } => v["field"] = json!(f),
            CliError::Assumption { failed, .. } => v["failed"] = json!(failed),
            CliError::Io { path, .. } => v["path"] = json!(path),
            _ => {}
        }
        v
    }
}
