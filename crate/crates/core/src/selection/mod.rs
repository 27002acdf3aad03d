//! Data curation: score-based pre-selection, the three-stage selection for
//! languages without a native trainable classifier, and stratified splits.

mod hp;
mod primary;
mod split;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tsv::{self, escape};
use crate::corpus::CorpusError;

pub use hp::{detoxify_score, preselect_hp, HpSelectionConfig};
pub use primary::{preselect_primary, PrimarySelectionConfig, Quotas};
pub use split::{
    apportion, load_splits, make_splits, read_splits, save_splits, stratum_key, write_splits, SplitConfig, SplitItem,
    Subset, SPLITS_HEADER,
};

pub const SELECTION_HEADER: &str = "id\tstage\tjustification\tscore";

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("utterance `{id}` has no `{category}` score from `{provider}`")]
    MissingScore {
        id: String,
        provider: String,
        category: String,
    },
    #[error("utterance `{0}` has no lexical detection record")]
    MissingDetection(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl SelectionError {
    pub fn is_io(&self) -> bool {
        matches!(self, SelectionError::Corpus(e) if e.is_io())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Intersection,
    EtoxOnly,
    Detoxify,
    RandomFill,
    CategorySample,
    CleanSample,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Intersection,
        Stage::EtoxOnly,
        Stage::Detoxify,
        Stage::RandomFill,
        Stage::CategorySample,
        Stage::CleanSample,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Intersection => "intersection",
            Stage::EtoxOnly => "etox_only",
            Stage::Detoxify => "detoxify",
            Stage::RandomFill => "random_fill",
            Stage::CategorySample => "category_sample",
            Stage::CleanSample => "clean_sample",
        }
    }

    /// Stages that count as toxic-candidate selections.
    pub fn is_toxic(self) -> bool {
        matches!(self, Stage::Intersection | Stage::EtoxOnly | Stage::Detoxify | Stage::CategorySample)
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub id: String,
    pub lang: String,
    pub stage: Stage,
    /// Matched tokens, score side or sampled category.
    pub justification: String,
    pub score: Option<f64>,
}

/// A stratum that could not be filled to its quota.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub stratum: String,
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selected: Vec<Selected>,
    pub shortfalls: Vec<Shortfall>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub lang: String,
    pub stage: String,
    pub count: usize,
}

impl SelectionOutcome {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.selected.iter().map(|s| s.id.as_str())
    }

    pub fn with_stage(&self, stage: Stage) -> impl Iterator<Item = &Selected> {
        self.selected.iter().filter(move |s| s.stage == stage)
    }

    /// Per-language counts for every stage that occurs, by language then
    /// stage order.
    pub fn stage_counts(&self) -> Vec<StageCount> {
        let mut counts: std::collections::BTreeMap<(&str, Stage), usize> = Default::default();
        for s in &self.selected {
            *counts.entry((&s.lang, s.stage)).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|((lang, stage), count)| StageCount {
                lang: lang.to_string(),
                stage: stage.as_str().to_string(),
                count,
            })
            .collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SelectionError + '_ {
    move |e| SelectionError::Corpus(CorpusError::io(path, e))
}

pub fn write_selection<W: Write>(mut w: W, outcome: &SelectionOutcome) -> std::io::Result<()> {
    writeln!(w, "{SELECTION_HEADER}")?;
    for s in &outcome.selected {
        let score = s.score.map(|x| x.to_string()).unwrap_or_default();
        writeln!(w, "{}\t{}\t{}\t{}", escape(&s.id), s.stage, escape(&s.justification), score)?;
    }
    Ok(())
}

pub fn save_selection(path: impl AsRef<Path>, outcome: &SelectionOutcome) -> Result<(), SelectionError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    write_selection(&mut w, outcome).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Reads `id stage justification score` rows. Languages are not stored in
/// the file and come back empty.
pub fn read_selection<R: BufRead>(reader: R) -> Result<SelectionOutcome, SelectionError> {
    let mut out = SelectionOutcome::default();
    for row in tsv::rows(reader, SELECTION_HEADER)? {
        let (line, mut f) = row?;
        let score = match f[3].as_str() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|e| CorpusError::Field {
                row: line,
                column: "score",
                detail: e.to_string(),
            })?),
        };
        let stage = f[1].parse::<Stage>().map_err(|detail| CorpusError::Field {
            row: line,
            column: "stage",
            detail,
        })?;
        out.selected.push(Selected {
            justification: std::mem::take(&mut f[2]),
            id: std::mem::take(&mut f[0]),
            lang: String::new(),
            stage,
            score,
        });
    }
    Ok(out)
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<SelectionOutcome, SelectionError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(io_err(path))?;
    read_selection(BufReader::new(f))
}
