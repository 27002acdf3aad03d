//! Utterances, classifier scores, embeddings and labels.
//!
//! All values here are plain immutable data once loaded. The TSV readers are
//! strict: headers must match exactly and every row error carries the 1-based
//! line number of the offending row (the header is line 1).

mod embeddings;
mod labels;
mod lang;
mod manifest;
mod scores;
pub(crate) mod tsv;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use embeddings::{load_embeddings, read_embeddings, save_embeddings, write_embeddings, EmbeddingRecord, MTXE_MAGIC, MTXE_VERSION};
pub use labels::{load_labels, read_labels, save_labels, write_labels, LabelRecord, LabelSet, ToxicityCategory, Verdict, LABELS_HEADER};
pub use lang::{LanguageRegistry, SEED_LANGUAGES};
pub use manifest::{filter_by_duration, load_manifest, read_manifest, save_manifest, write_manifest, DatasetManifest, ManifestOptions, Provenance, Utterance, MANIFEST_HEADER};
pub use scores::{load_scores, read_scores, save_scores, write_scores, ScoreCategory, ScoreRecord, ScoreSide, ScoreTable, SCORES_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Speech,
    Text,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Speech => "speech",
            Modality::Text => "text",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "speech" => Ok(Modality::Speech),
            "text" => Ok(Modality::Text),
            other => Err(format!("unknown modality `{other}` (expected speech or text)")),
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}, column {column}: {detail}")]
    Field {
        row: usize,
        column: &'static str,
        detail: String,
    },
    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: duplicate score key ({id}, {provider}, {category})")]
    DuplicateScore {
        row: usize,
        id: String,
        provider: String,
        category: String,
    },
    #[error("row {row}: unregistered language code `{lang}`")]
    UnregisteredLang { row: usize, lang: String },
    #[error("invalid duration range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
    #[error("bad magic bytes {found:02X?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u8, found: u8 },
    #[error("embedding dimension mismatch: expected {expected}, file declares {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("truncated payload: {detail}")]
    Truncated { detail: String },
    #[error("{0} unexpected bytes after the last record")]
    TrailingData(usize),
    #[error("record `{id}`: non-finite value at index {index}")]
    NonFinite { id: String, index: usize },
    #[error("record id `{id}` is {len} bytes; the limit is 65535")]
    IdTooLong { id: String, len: usize },
    #[error("embedding `{id}` has length {found}, expected {expected}")]
    VectorLength {
        id: String,
        expected: usize,
        found: usize,
    },
}

impl CorpusError {
    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;
