//! Human toxicity labels, as exported by an annotation campaign.
//!
//! Labels TSV header: `id	lang	verdict	categories`, with categories
//! comma-separated (empty when none).

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tsv::{self, escape};
use super::{CorpusError, Result};

pub const LABELS_HEADER: &str = "id\tlang\tverdict\tcategories";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Toxic,
    NotToxic,
    CannotSay,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Toxic, Verdict::NotToxic, Verdict::CannotSay];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Toxic => "Toxic",
            Verdict::NotToxic => "NotToxic",
            Verdict::CannotSay => "CannotSay",
        }
    }

    /// `Some(true)` for toxic, `Some(false)` for not toxic, `None` for cannot-say.
    pub fn as_binary(self) -> Option<bool> {
        match self {
            Verdict::Toxic => Some(true),
            Verdict::NotToxic => Some(false),
            Verdict::CannotSay => None,
        }
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Toxic" => Ok(Verdict::Toxic),
            "NotToxic" => Ok(Verdict::NotToxic),
            "CannotSay" => Ok(Verdict::CannotSay),
            other => Err(format!("unknown verdict `{other}` (expected Toxic, NotToxic or CannotSay)")),
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Annotation-time toxicity categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToxicityCategory {
    Profanity,
    HateSpeech,
    Pornographic,
    ViolenceBullying,
}

impl ToxicityCategory {
    pub const ALL: [ToxicityCategory; 4] = [
        ToxicityCategory::Profanity,
        ToxicityCategory::HateSpeech,
        ToxicityCategory::Pornographic,
        ToxicityCategory::ViolenceBullying,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToxicityCategory::Profanity => "Profanity",
            ToxicityCategory::HateSpeech => "HateSpeech",
            ToxicityCategory::Pornographic => "Pornographic",
            ToxicityCategory::ViolenceBullying => "ViolenceBullying",
        }
    }
}

impl std::str::FromStr for ToxicityCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToxicityCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown toxicity category `{s}`"))
    }
}

impl std::fmt::Display for ToxicityCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub lang: String,
    pub verdict: Verdict,
    pub categories: BTreeSet<ToxicityCategory>,
}

/// Labels in file order with an id index.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    records: Vec<LabelRecord>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn from_records(records: Vec<LabelRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    row: i + 1,
                    id: r.id.clone(),
                });
            }
        }
        Ok(Self { records, index })
    }

    pub fn get(&self, id: &str) -> Option<&LabelRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn verdicts(&self) -> HashMap<String, Verdict> {
        self.records.iter().map(|r| (r.id.clone(), r.verdict)).collect()
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_labels(BufReader::new(file))
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<LabelSet> {
    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for row in tsv::rows(reader, LABELS_HEADER)? {
        let (row, fields) = row?;
        let [id, lang, verdict, categories]: [String; 4] =
            fields.try_into().expect("column count checked by reader");
        if id.is_empty() {
            return Err(CorpusError::Field {
                row,
                column: "id",
                detail: "empty id".into(),
            });
        }
        let verdict: Verdict = verdict.parse().map_err(|detail| CorpusError::Field {
            row,
            column: "verdict",
            detail,
        })?;
        let categories = categories
            .split(',')
            .filter(|c| !c.is_empty())
            .map(|c| c.parse())
            .collect::<Result<BTreeSet<ToxicityCategory>, String>>()
            .map_err(|detail| CorpusError::Field {
                row,
                column: "categories",
                detail,
            })?;
        if seen.insert(id.clone(), row).is_some() {
            return Err(CorpusError::DuplicateId { row, id });
        }
        records.push(LabelRecord {
            id,
            lang,
            verdict,
            categories,
        });
    }
    LabelSet::from_records(records)
}

pub fn write_labels<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a LabelRecord>,
) -> std::io::Result<()> {
    writeln!(writer, "{LABELS_HEADER}")?;
    for r in records {
        let cats: Vec<&str> = r.categories.iter().map(|c| c.as_str()).collect();
        writeln!(
            writer,
            "{}\t{}\t{}\t{}",
            escape(&r.id),
            escape(&r.lang),
            r.verdict,
            cats.join(",")
        )?;
    }
    writer.flush()
}

pub fn save_labels<'a>(path: impl AsRef<Path>, records: impl IntoIterator<Item = &'a LabelRecord>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_labels(BufWriter::new(file), records).map_err(|e| CorpusError::io(path, e))
}
