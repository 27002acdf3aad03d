use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tsv::{self, escape};
use super::{CorpusError, Result};

pub const SCORES_HEADER: &str = "id\tprovider\tcategory\tscore\tscore_side";

/// Score categories emitted by text classifiers; single-score providers use
/// [`ScoreCategory::Overall`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreCategory {
    Severe,
    Obscene,
    Identity,
    Insult,
    Threat,
    Sexual,
    Overall,
}

impl ScoreCategory {
    /// The six per-category scores, excluding `overall`.
    pub const TOXICITY: [ScoreCategory; 6] = [
        ScoreCategory::Severe,
        ScoreCategory::Obscene,
        ScoreCategory::Identity,
        ScoreCategory::Insult,
        ScoreCategory::Threat,
        ScoreCategory::Sexual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreCategory::Severe => "severe",
            ScoreCategory::Obscene => "obscene",
            ScoreCategory::Identity => "identity",
            ScoreCategory::Insult => "insult",
            ScoreCategory::Threat => "threat",
            ScoreCategory::Sexual => "sexual",
            ScoreCategory::Overall => "overall",
        }
    }
}

impl std::str::FromStr for ScoreCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "severe" => ScoreCategory::Severe,
            "obscene" => ScoreCategory::Obscene,
            "identity" => ScoreCategory::Identity,
            "insult" => ScoreCategory::Insult,
            "threat" => ScoreCategory::Threat,
            "sexual" => ScoreCategory::Sexual,
            "overall" => ScoreCategory::Overall,
            other => return Err(format!("unknown score category `{other}`")),
        })
    }
}

impl std::fmt::Display for ScoreCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which text a score was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSide {
    Native,
    EnglishParallel,
}

impl ScoreSide {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreSide::Native => "native",
            ScoreSide::EnglishParallel => "english_parallel",
        }
    }
}

impl std::str::FromStr for ScoreSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(ScoreSide::Native),
            "english_parallel" => Ok(ScoreSide::EnglishParallel),
            other => Err(format!("unknown score side `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub utterance_id: String,
    pub provider: String,
    pub category: ScoreCategory,
    pub score: f64,
    pub score_side: ScoreSide,
}

/// Score records with a `(id, provider, category)` index.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
    index: HashMap<(String, String, ScoreCategory), usize>,
}

impl ScoreTable {
    /// Fails on a duplicate key or a score outside `[0, 1]`; `row` in the
    /// error is the 1-based position of the record.
    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Result<Self> {
        let mut table = ScoreTable::default();
        for (i, r) in records.into_iter().enumerate() {
            table.insert(r, i + 1)?;
        }
        Ok(table)
    }

    fn insert(&mut self, record: ScoreRecord, row: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&record.score) {
            return Err(CorpusError::Field {
                row,
                column: "score",
                detail: format!("score {} outside [0, 1]", record.score),
            });
        }
        let key = (record.utterance_id.clone(), record.provider.clone(), record.category);
        if self.index.contains_key(&key) {
            return Err(CorpusError::DuplicateScore {
                row,
                id: record.utterance_id,
                provider: record.provider,
                category: record.category.to_string(),
            });
        }
        self.index.insert(key, self.records.len());
        self.records.push(record);
        Ok(())
    }

    /// Appends every record of `other`, rejecting key collisions.
    pub fn merge(&mut self, other: ScoreTable) -> Result<()> {
        let offset = self.records.len();
        for (i, r) in other.records.into_iter().enumerate() {
            self.insert(r, offset + i + 1)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str, provider: &str, category: ScoreCategory) -> Option<&ScoreRecord> {
        // Borrowed-key lookup on a tuple key needs owned parts.
        self.index
            .get(&(id.to_string(), provider.to_string(), category))
            .map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct providers in first-seen order.
    pub fn providers(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.provider) {
                out.push(r.provider.clone());
            }
        }
        out
    }

    /// `id -> score` for one provider and category.
    pub fn scores_for(&self, provider: &str, category: ScoreCategory) -> HashMap<String, f64> {
        self.records
            .iter()
            .filter(|r| r.provider == provider && r.category == category)
            .map(|r| (r.utterance_id.clone(), r.score))
            .collect()
    }
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_scores(BufReader::new(file))
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<ScoreTable> {
    let mut table = ScoreTable::default();
    for row in tsv::rows(reader, SCORES_HEADER)? {
        let (row, fields) = row?;
        let [id, provider, category, score, side]: [String; 5] =
            fields.try_into().expect("column count checked by reader");
        if id.is_empty() {
            return Err(CorpusError::Field {
                row,
                column: "id",
                detail: "empty id".into(),
            });
        }
        let category: ScoreCategory = category.parse().map_err(|detail| CorpusError::Field {
            row,
            column: "category",
            detail,
        })?;
        let score: f64 = score.parse().map_err(|_| CorpusError::Field {
            row,
            column: "score",
            detail: format!("`{score}` is not a number"),
        })?;
        let score_side: ScoreSide = side.parse().map_err(|detail| CorpusError::Field {
            row,
            column: "score_side",
            detail,
        })?;
        table.insert(
            ScoreRecord {
                utterance_id: id,
                provider,
                category,
                score,
                score_side,
            },
            row,
        )?;
    }
    Ok(table)
}

/// Scores are written with Rust's shortest round-trip float formatting.
pub fn write_scores<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a ScoreRecord>,
) -> std::io::Result<()> {
    writeln!(writer, "{SCORES_HEADER}")?;
    for r in records {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}",
            escape(&r.utterance_id),
            escape(&r.provider),
            r.category,
            r.score,
            r.score_side.as_str()
        )?;
    }
    writer.flush()
}

pub fn save_scores<'a>(path: impl AsRef<Path>, records: impl IntoIterator<Item = &'a ScoreRecord>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_scores(BufWriter::new(file), records).map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_indexes() {
        let text = format!(
            "{SCORES_HEADER}\nu1\tdetoxify\tinsult\t0.9\tnative\nu1\tdetoxify\toverall\t0.7\tenglish_parallel\n"
        );
        let t = read_scores(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("u1", "detoxify", ScoreCategory::Insult).unwrap().score, 0.9);
        assert_eq!(
            t.get("u1", "detoxify", ScoreCategory::Overall).unwrap().score_side,
            ScoreSide::EnglishParallel
        );
        assert!(t.get("u1", "etox", ScoreCategory::Overall).is_none());
    }

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        let text = format!("{SCORES_HEADER}\nu1\tetox\toverall\t1.5\tnative\n");
        assert!(matches!(read_scores(text.as_bytes()), Err(CorpusError::Field { row: 2, column: "score", .. })));
        let text = format!("{SCORES_HEADER}\nu1\tetox\toverall\t1\tnative\nu1\tetox\toverall\t0\tnative\n");
        assert!(matches!(read_scores(text.as_bytes()), Err(CorpusError::DuplicateScore { row: 3, .. })));
    }

    #[test]
    fn write_read_round_trip() {
        let records = vec![ScoreRecord {
            utterance_id: "x".into(),
            provider: "mutox".into(),
            category: ScoreCategory::Overall,
            score: 0.123_456_789_012_345_67,
            score_side: ScoreSide::Native,
        }];
        let mut buf = Vec::new();
        write_scores(&mut buf, &records).unwrap();
        let t = read_scores(buf.as_slice()).unwrap();
        assert_eq!(t.records(), records.as_slice());
    }
}
