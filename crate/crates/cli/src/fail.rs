use std::fmt;
use std::process::ExitCode;

use skgkit::ingest::{IngestError, ManifestViolation, ManifestViolationKind};
use skgkit::metrics::MetricError;
use skgkit::tokenizer::BpeError;

/// A failed command, mapped to its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: manifest, dataset contents, ids, flags. Exit 1.
    Validation(String),
    /// Unreadable or unwritable files. Exit 2.
    Io(String),
    /// A postcondition the pipeline should guarantee did not hold. Exit 3.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
            Failure::Internal(_) => 3,
        })
    }

    /// Manifest violations. Missing paths count as I/O failures only when
    /// `missing_is_io` is set.
    pub fn from_violations(violations: &[ManifestViolation], missing_is_io: bool) -> Failure {
        let text = violations
            .iter()
            .map(|v| format!("  - {v}"))
            .collect::<Vec<_>>()
            .join("\n");
        let msg = format!("manifest is invalid:\n{text}");
        let only_missing = violations.iter().all(|v| v.kind == ManifestViolationKind::MissingPath);
        if missing_is_io && only_missing {
            Failure::Io(msg)
        } else {
            Failure::Validation(msg)
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Io(m) => f.write_str(m),
            Failure::Internal(m) => write!(f, "internal invariant breach: {m}"),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<BpeError> for Failure {
    fn from(e: BpeError) -> Self {
        match e {
            BpeError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}
