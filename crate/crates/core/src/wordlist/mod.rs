//! Wordlist-based lexical toxicity detection.
//!
//! A [`WordList`] holds case-folded entries for one language and matches them
//! either against whitespace tokens ([`MatchMode::Token`]) or anywhere in the
//! folded text ([`MatchMode::Substring`], used for scripts without word
//! delimiters). Per-token precision and recall analysis lives in
//! [`token_report`].

mod analysis;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

pub use analysis::{token_report, TokenReport, TokenStats};

#[derive(Debug, thiserror::Error)]
pub enum WordlistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: wordlist has no entries")]
    Empty(String),
    #[error("line {line}: malformed directive `{text}` (expected `!match: token` or `!match: substring` on the first line)")]
    Directive { line: usize, text: String },
    #[error("line {line}: entry `{text}` has no matchable tokens")]
    UnmatchableEntry { line: usize, text: String },
    #[error("detection for `{0}` has no label")]
    Unlabeled(String),
}

impl WordlistError {
    pub fn is_io(&self) -> bool {
        matches!(self, WordlistError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Token,
    Substring,
}

impl MatchMode {
    /// Languages written without spaces between words default to substring matching.
    pub fn default_for(lang: &str) -> MatchMode {
        match lang {
            "cmn" | "jpn" | "tha" => MatchMode::Substring,
            _ => MatchMode::Token,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    text: String,
    tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    lang: String,
    match_mode: MatchMode,
    entries: Vec<Entry>,
    by_first_token: HashMap<String, Vec<usize>>,
}

pub fn fold(text: &str) -> String {
    caseless::default_case_fold_str(text)
}

fn is_edge_punct(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// Case-folds, splits on Unicode whitespace and strips punctuation and symbols
/// from token edges. Tokens that are entirely punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    fold(text)
        .split_whitespace()
        .map(|t| t.trim_matches(is_edge_punct))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl WordList {
    pub fn new<'a>(
        lang: impl Into<String>,
        match_mode: MatchMode,
        entries: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, WordlistError> {
        let lang = lang.into();
        let mut folded = BTreeMap::new();
        for (i, raw) in entries.into_iter().enumerate() {
            let text = fold(raw).split_whitespace().collect::<Vec<_>>().join(" ");
            if text.is_empty() {
                continue;
            }
            folded.entry(text).or_insert(i + 1);
        }
        Self::from_folded(lang, match_mode, folded)
    }

    fn from_folded(
        lang: String,
        match_mode: MatchMode,
        folded: BTreeMap<String, usize>,
    ) -> Result<Self, WordlistError> {
        if folded.is_empty() {
            return Err(WordlistError::Empty(lang));
        }
        let mut entries = Vec::with_capacity(folded.len());
        let mut by_first_token: HashMap<String, Vec<usize>> = HashMap::new();
        for (text, line) in folded {
            let tokens = match match_mode {
                MatchMode::Token => tokenize(&text),
                MatchMode::Substring => Vec::new(),
            };
            if match_mode == MatchMode::Token {
                match tokens.first() {
                    Some(first) => by_first_token.entry(first.clone()).or_default().push(entries.len()),
                    None => return Err(WordlistError::UnmatchableEntry { line, text }),
                }
            }
            entries.push(Entry { text, tokens });
        }
        Ok(Self {
            lang,
            match_mode,
            entries,
            by_first_token,
        })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn match_mode(&self) -> MatchMode {
        self.match_mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending (folded) order.
    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.text.as_str())
    }

    pub fn contains(&self, entry: &str) -> bool {
        self.entries.binary_search_by(|e| e.text.as_str().cmp(entry)).is_ok()
    }

    /// A copy of this list with additional entries.
    pub fn with_entries<'a>(&self, extra: impl IntoIterator<Item = &'a str>) -> Result<Self, WordlistError> {
        let mut all: Vec<String> = self.entries().map(str::to_string).collect();
        all.extend(extra.into_iter().map(str::to_string));
        WordList::new(self.lang.clone(), self.match_mode, all.iter().map(String::as_str))
    }

    /// Matched entries ordered by match position, then entry order.
    pub fn matches(&self, text: &str) -> Vec<String> {
        let mut hits: Vec<(usize, usize)> = Vec::new();
        match self.match_mode {
            MatchMode::Token => {
                let tokens = tokenize(text);
                for (pos, token) in tokens.iter().enumerate() {
                    let Some(candidates) = self.by_first_token.get(token) else {
                        continue;
                    };
                    for &idx in candidates {
                        let entry = &self.entries[idx].tokens;
                        if tokens[pos..].starts_with(entry) {
                            hits.push((pos, idx));
                        }
                    }
                }
            }
            MatchMode::Substring => {
                let folded = fold(text);
                for (idx, entry) in self.entries.iter().enumerate() {
                    let mut start = 0;
                    while let Some(offset) = folded[start..].find(entry.text.as_str()) {
                        let pos = start + offset;
                        hits.push((pos, idx));
                        // Advance one character so overlapping occurrences count.
                        let step = folded[pos..].chars().next().map_or(1, char::len_utf8);
                        start = pos + step;
                    }
                }
            }
        }
        hits.sort_unstable();
        hits.into_iter().map(|(_, idx)| self.entries[idx].text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalDetection {
    pub utterance_id: String,
    pub matched_tokens: Vec<String>,
    pub is_toxic: bool,
}

impl LexicalDetection {
    /// Two-point score used by the metric code: 1 when any entry matched.
    pub fn score(&self) -> f64 {
        if self.is_toxic {
            1.0
        } else {
            0.0
        }
    }

    pub fn distinct_tokens(&self) -> BTreeSet<&str> {
        self.matched_tokens.iter().map(String::as_str).collect()
    }
}

pub fn detect(utterance_id: impl Into<String>, text: &str, list: &WordList) -> LexicalDetection {
    let matched_tokens = list.matches(text);
    LexicalDetection {
        utterance_id: utterance_id.into(),
        is_toxic: !matched_tokens.is_empty(),
        matched_tokens,
    }
}

/// Parses a wordlist file body. `lang` normally comes from the file name.
pub fn parse_wordlist(lang: &str, body: &str) -> Result<WordList, WordlistError> {
    let mut mode = None;
    let mut folded = BTreeMap::new();
    for (i, line) in body.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.starts_with("!match") {
            if i != 0 {
                return Err(WordlistError::Directive {
                    line: line_no,
                    text: line.to_string(),
                });
            }
            let value = line
                .strip_prefix("!match")
                .and_then(|rest| rest.trim_start().strip_prefix(':'))
                .map(str::trim);
            mode = Some(match value {
                Some("token") => MatchMode::Token,
                Some("substring") => MatchMode::Substring,
                _ => {
                    return Err(WordlistError::Directive {
                        line: line_no,
                        text: line.to_string(),
                    })
                }
            });
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let text = fold(line).split_whitespace().collect::<Vec<_>>().join(" ");
        folded.entry(text).or_insert(line_no);
    }
    let mode = mode.unwrap_or_else(|| MatchMode::default_for(lang));
    WordList::from_folded(lang.to_string(), mode, folded)
}

/// Loads `<lang>.txt`; the language code is the file stem.
pub fn load_wordlist(path: impl AsRef<Path>) -> Result<WordList, WordlistError> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|source| WordlistError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let lang = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_wordlist(&lang, &body)
}

/// Loads every `*.txt` in a directory, keyed by language.
pub fn load_wordlist_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, WordList>, WordlistError> {
    let dir = dir.as_ref();
    let io = |source| WordlistError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut lists = BTreeMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    paths.sort();
    for path in paths {
        if path.extension().is_some_and(|e| e == "txt") {
            let list = load_wordlist(&path)?;
            lists.insert(list.lang().to_string(), list);
        }
    }
    Ok(lists)
}
