use std::path::PathBuf;

use ssdual::ErrorKind;
use thiserror::Error;

use crate::emit::Doc;

/// A transition-matrix row that failed validation, located in the input
/// file rather than in the internal enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BadRow {
    /// Zero-based row index in the file.
    pub row: usize,
    pub state: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{field}: {message}")]
    Field { field: String, message: String },

    #[error("chain.matrix is not stochastic: {}", .0.iter().map(|r| r.message.as_str()).collect::<Vec<_>>().join("; "))]
    Rows(Vec<BadRow>),

    #[error(transparent)]
    Core(#[from] ssdual::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            _ => ErrorKind::Input,
        }
    }

    /// 1 = input or schema, 2 = failed precondition, 3 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Input => 1,
            ErrorKind::Precondition => 2,
            ErrorKind::Numerical => 3,
        }
    }

    /// The machine-readable block written to stderr.
    pub fn to_block(&self) -> String {
        let mut doc = Doc::new();
        doc.table("error");
        doc.str(
            "kind",
            match self.kind() {
                ErrorKind::Input => "input",
                ErrorKind::Precondition => "precondition",
                ErrorKind::Numerical => "numerical",
            },
        );
        doc.int("code", self.exit_code() as i64);
        doc.str("message", &self.to_string());
        match self {
            CliError::Field { field, .. } => doc.str("field", field),
            CliError::Rows(rows) => {
                doc.int("row", rows[0].row as i64);
                doc.str("state", &rows[0].state);
                doc.int_list("rows", rows.iter().map(|r| r.row as i64));
            }
            CliError::Core(ssdual::Error::Stage { stage, .. }) => doc.str("stage", stage),
            _ => {}
        }
        doc.finish()
    }
}
