//! Annotation campaigns: task leasing, response validation, an append-only
//! label log with replay, and label export.

mod campaign;
mod response;

use std::path::PathBuf;

pub use campaign::{
    tasks_from_manifest, AnnotationTask, Campaign, CampaignConfig, ExportSummary, ExportedLabel, LabelLogRecord,
    Progress, SubmitAck, TaskStatus,
};
pub use response::{AnnotationResponse, Effect, RawResponse, ValidationError};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("{0}")]
    Validation(#[from] ValidationError),
    #[error("unknown campaign `{0}`")]
    UnknownCampaign(String),
    #[error("duplicate task for utterance `{0}`")]
    DuplicateUtterance(String),
    #[error("replication must be at least 1")]
    InvalidReplication,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {detail}")]
    CorruptLog { path: PathBuf, line: usize, detail: String },
}

impl AnnotationError {
    pub fn is_io(&self) -> bool {
        matches!(self, AnnotationError::Io { .. })
    }
}
