use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{io_err, SelectionError};
use crate::corpus::tsv;
use crate::corpus::CorpusError;
use crate::rng::{derive_seed, seeded};

pub const SPLITS_HEADER: &str = "id\tsubset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Dev,
    Devtest,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::Train, Subset::Dev, Subset::Devtest, Subset::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Dev => "dev",
            Subset::Devtest => "devtest",
            Subset::Test => "test",
        }
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subset::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown subset `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Ratios for train, dev, devtest and test.
    pub ratios: [f64; 4],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.70, 0.05, 0.10, 0.15],
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(SelectionError::InvalidConfig(format!("split ratios {:?} must be non-negative", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SelectionError::InvalidConfig(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitItem {
    pub id: String,
    pub stratum: String,
}

/// Joins the stratification fields into one key.
pub fn stratum_key(verdict: &str, category_bucket: &str, source: &str) -> String {
    format!("{verdict}|{category_bucket}|{source}")
}

const FLOOR_EPSILON: f64 = 1e-9;

/// Largest-remainder apportionment of `n` over `ratios`; remainder ties go
/// to the earlier position.
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + FLOOR_EPSILON).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    let remainder = |i: usize| (quotas[i] - sizes[i] as f64).max(0.0);
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Assigns every item to a subset. Each stratum is shuffled with its own
/// seed derived from the config seed and the stratum key, then cut by
/// [`apportion`]. The result follows the input order.
pub fn make_splits(items: &[SplitItem], config: &SplitConfig) -> Result<Vec<(String, Subset)>, SelectionError> {
    config.validate()?;
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if !seen.insert(item.id.as_str()) {
            return Err(SelectionError::DuplicateId(item.id.clone()));
        }
    }
    let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        strata.entry(&item.stratum).or_default().push(i);
    }
    let mut assignment = vec![Subset::Train; items.len()];
    for (key, mut members) in strata {
        let mut rng = seeded(derive_seed(config.seed, key));
        members.shuffle(&mut rng);
        let sizes = apportion(members.len(), &config.ratios);
        let mut start = 0;
        for (subset, size) in Subset::ALL.into_iter().zip(sizes) {
            for &i in &members[start..start + size] {
                assignment[i] = subset;
            }
            start += size;
        }
    }
    Ok(items.iter().map(|i| i.id.clone()).zip(assignment).collect())
}

pub fn write_splits<W: Write>(mut w: W, splits: &[(String, Subset)]) -> std::io::Result<()> {
    writeln!(w, "{SPLITS_HEADER}")?;
    for (id, subset) in splits {
        writeln!(w, "{}\t{}", tsv::escape(id), subset)?;
    }
    Ok(())
}

pub fn save_splits(path: impl AsRef<Path>, splits: &[(String, Subset)]) -> Result<(), SelectionError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    write_splits(&mut w, splits).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_splits<R: BufRead>(reader: R) -> Result<Vec<(String, Subset)>, SelectionError> {
    let mut out = Vec::new();
    for row in tsv::rows(reader, SPLITS_HEADER)? {
        let (line, mut f) = row?;
        let subset = f[1].parse().map_err(|detail| CorpusError::Field {
            row: line,
            column: "subset",
            detail,
        })?;
        out.push((std::mem::take(&mut f[0]), subset));
    }
    Ok(out)
}

pub fn load_splits(path: impl AsRef<Path>) -> Result<Vec<(String, Subset)>, SelectionError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(io_err(path))?;
    read_splits(BufReader::new(f))
}
