//! Errors, shared loaders and the run manifest.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mutox::annotation::AnnotationError;
use mutox::classifier::ClassifierError;
use mutox::corpus::{
    self, CorpusError, DatasetManifest, LabelSet, ManifestOptions, ScoreCategory, ScoreTable,
};
use mutox::evaluation::EvalError;
use mutox::selection::SelectionError;
use mutox::wordlist::WordlistError;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Exit 1 for invalid input or usage, 2 for I/O failures.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

macro_rules! classify {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                if e.is_io() {
                    CliError::Io(e.to_string())
                } else {
                    CliError::Invalid(e.to_string())
                }
            }
        }
    )*};
}

classify!(CorpusError, ClassifierError, EvalError, SelectionError, WordlistError, AnnotationError);

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn load_manifest(path: &Path) -> CliResult<DatasetManifest> {
    Ok(corpus::load_manifest(path, &ManifestOptions::default())?)
}

pub fn load_scores(paths: &[PathBuf]) -> CliResult<ScoreTable> {
    let mut table = ScoreTable::default();
    for p in paths {
        table.merge(corpus::load_scores(p)?)?;
    }
    Ok(table)
}

pub fn load_labels(path: &Path) -> CliResult<LabelSet> {
    Ok(corpus::load_labels(path)?)
}

/// One score per item and provider: `overall` when present, else the max
/// over the per-category scores. Providers come back sorted by name.
pub fn provider_scores(table: &ScoreTable) -> BTreeMap<String, HashMap<String, f64>> {
    let mut overall: BTreeMap<String, HashMap<String, f64>> = BTreeMap::new();
    let mut fallback: BTreeMap<String, HashMap<String, f64>> = BTreeMap::new();
    for r in table.records() {
        let target = if r.category == ScoreCategory::Overall {
            &mut overall
        } else {
            &mut fallback
        };
        let e = target
            .entry(r.provider.clone())
            .or_default()
            .entry(r.utterance_id.clone())
            .or_insert(r.score);
        if r.score > *e {
            *e = r.score;
        }
    }
    for (provider, items) in fallback {
        let dst = overall.entry(provider).or_default();
        for (id, s) in items {
            dst.entry(id).or_insert(s);
        }
    }
    overall
}

pub fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

/// Builds a CSV in memory with minimal quoting.
pub struct CsvText(String);

impl CsvText {
    pub fn new(header: &[&str]) -> Self {
        let mut c = CsvText(String::new());
        c.row(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells
            .into_iter()
            .map(|c| {
                if c.contains([',', '"', '\n']) {
                    format!("\"{}\"", c.replace('"', "\"\""))
                } else {
                    c
                }
            })
            .collect();
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }

    pub fn write(&self, path: &Path) -> CliResult {
        write_text(path, &self.0)
    }
}

pub fn parse_kv_list(text: &str, what: &str) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("{what}: expected key=value, got `{part}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("{what}: `{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct InputChecksum {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a, A: Serialize> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed: Option<u64>,
    config_file: Option<String>,
    resolved: &'a A,
    inputs: Vec<InputChecksum>,
    outputs: Vec<String>,
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> CliResult {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for e in entries {
            collect_files(&e, out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Context shared by every subcommand.
pub struct RunContext {
    pub config_file: Option<PathBuf>,
}

impl RunContext {
    /// Writes `run-manifest.json` into `out_dir`: resolved arguments, seed,
    /// SHA-256 of every input file and the names of the files in `out_dir`.
    pub fn write_manifest<A: Serialize>(
        &self,
        out_dir: &Path,
        subcommand: &str,
        seed: Option<u64>,
        resolved: &A,
        inputs: &[&Path],
    ) -> CliResult {
        let mut files = Vec::new();
        for p in inputs {
            collect_files(p, &mut files)?;
        }
        if let Some(c) = &self.config_file {
            files.push(c.clone());
        }
        let mut checksums = Vec::new();
        for f in files {
            let bytes = fs::read(&f).map_err(|e| CliError::io(&f, e))?;
            checksums.push(InputChecksum {
                path: f.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let mut outputs: Vec<String> = fs::read_dir(out_dir)
            .map_err(|e| CliError::io(out_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != "run-manifest.json")
            .collect();
        outputs.sort();
        let manifest = RunManifest {
            tool: "mutox",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            config_file: self.config_file.as_ref().map(|p| p.display().to_string()),
            resolved,
            inputs: checksums,
            outputs,
        };
        write_json(&out_dir.join("run-manifest.json"), &manifest)
    }
}
