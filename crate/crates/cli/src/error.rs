use std::path::PathBuf;

use thiserror::Error;

/// Everything the pipeline can fail with. I/O failures exit with code 3,
/// everything else is a validation failure and exits with code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}: parse error at {location}: {detail}")]
    Parse { source_name: String, location: String, detail: String },
    #[error("{source_name}: missing track `{track}`")]
    MissingTrack { source_name: String, track: String },
    #[error("{source_name}: track `{track}` has {got} frames, expected {expected} (file truncated?)")]
    TruncatedTrack { source_name: String, track: String, expected: usize, got: usize },
    #[error("{source_name}: unsupported format `{found}`, expected `{expected}`")]
    VersionUnsupported { source_name: String, found: String, expected: String },
    #[error("{source_name}: track `{track}` frame {frame}: quaternion norm {norm} is not 1 within 1e-6")]
    NormViolation { source_name: String, track: String, frame: usize, norm: f64 },
    #[error("{source_name}: {detail}")]
    Invalid { source_name: String, detail: String },
    #[error("bad synth config: {0}")]
    BadConfig(String),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn invalid(source_name: &str, detail: impl Into<String>) -> Self {
        CliError::Invalid { source_name: source_name.to_string(), detail: detail.into() }
    }
}
