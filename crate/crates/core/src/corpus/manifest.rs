use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tsv::{self, escape, optional};
use super::{CorpusError, LanguageRegistry, Modality, Result};

pub const MANIFEST_HEADER: &str =
    "id\tlang\tmodality\tduration_s\ttranscript\taudio_path\tsource\tparallel_eng_id";

/// One audio or text item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub lang: String,
    pub modality: Modality,
    pub duration_s: Option<f64>,
    pub transcript: Option<String>,
    pub audio_path: Option<String>,
    pub source: String,
    /// Id of the aligned English utterance, when the item comes from parallel data.
    pub parallel_eng_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: PathBuf,
    pub rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub utterances: Vec<Utterance>,
    pub provenance: Vec<Provenance>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Language codes in ascending order.
    pub fn languages(&self) -> Vec<String> {
        let mut langs: Vec<String> = self.utterances.iter().map(|u| u.lang.clone()).collect();
        langs.sort();
        langs.dedup();
        langs
    }
}

#[derive(Debug, Clone, Default)]
pub struct ManifestOptions {
    pub registry: LanguageRegistry,
    pub allow_unregistered_lang: bool,
}

pub fn load_manifest(path: impl AsRef<Path>, options: &ManifestOptions) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut manifest = read_manifest(BufReader::new(file), options)?;
    for p in &mut manifest.provenance {
        p.path = path.to_path_buf();
    }
    Ok(manifest)
}

pub fn read_manifest<R: BufRead>(reader: R, options: &ManifestOptions) -> Result<DatasetManifest> {
    let mut utterances = Vec::new();
    let mut seen = HashSet::new();
    for row in tsv::rows(reader, MANIFEST_HEADER)? {
        let (row, fields) = row?;
        let mut fields = fields.into_iter();
        let mut next = || fields.next().unwrap_or_default();
        let id = next();
        let lang = next();
        let modality = next();
        let duration = next();
        let transcript = next();
        let audio_path = next();
        let source = next();
        let parallel = next();

        if id.is_empty() {
            return Err(CorpusError::Field {
                row,
                column: "id",
                detail: "empty id".into(),
            });
        }
        if !options.allow_unregistered_lang && !options.registry.contains(&lang) {
            return Err(CorpusError::UnregisteredLang { row, lang });
        }
        let modality: Modality = modality.parse().map_err(|detail| CorpusError::Field {
            row,
            column: "modality",
            detail,
        })?;
        let duration_s = if duration.is_empty() {
            None
        } else {
            let value: f64 = duration.parse().map_err(|_| CorpusError::Field {
                row,
                column: "duration_s",
                detail: format!("`{duration}` is not a number"),
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(CorpusError::Field {
                    row,
                    column: "duration_s",
                    detail: format!("duration must be finite and nonnegative, got {value}"),
                });
            }
            Some(value)
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { row, id });
        }
        utterances.push(Utterance {
            id,
            lang,
            modality,
            duration_s,
            transcript: optional(transcript),
            audio_path: optional(audio_path),
            source,
            parallel_eng_id: optional(parallel),
        });
    }
    let rows = utterances.len();
    Ok(DatasetManifest {
        utterances,
        provenance: vec![Provenance {
            path: PathBuf::from("<input>"),
            rows,
        }],
    })
}

pub fn write_manifest<W: Write>(mut writer: W, manifest: &DatasetManifest) -> std::io::Result<()> {
    writeln!(writer, "{MANIFEST_HEADER}")?;
    for u in &manifest.utterances {
        let opt = |v: &Option<String>| v.as_deref().map(escape).unwrap_or_default();
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            escape(&u.id),
            escape(&u.lang),
            u.modality,
            u.duration_s.map(|d| d.to_string()).unwrap_or_default(),
            opt(&u.transcript),
            opt(&u.audio_path),
            escape(&u.source),
            opt(&u.parallel_eng_id),
        )?;
    }
    writer.flush()
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_manifest(BufWriter::new(file), manifest).map_err(|e| CorpusError::io(path, e))
}

/// Keeps utterances with `min_s <= duration_s <= max_s`. Items without a
/// duration (text) always pass.
pub fn filter_by_duration(manifest: &DatasetManifest, min_s: f64, max_s: f64) -> Result<DatasetManifest> {
    if min_s.is_nan() || max_s.is_nan() || min_s > max_s {
        return Err(CorpusError::InvalidRange { min: min_s, max: max_s });
    }
    let utterances = manifest
        .utterances
        .iter()
        .filter(|u| match u.duration_s {
            Some(d) => d >= min_s && d <= max_s,
            None => true,
        })
        .cloned()
        .collect();
    Ok(DatasetManifest {
        utterances,
        provenance: manifest.provenance.clone(),
    })
}
