use std::collections::BTreeSet;

/// The 30 annotated languages (ISO 639-3).
pub const SEED_LANGUAGES: [&str; 30] = [
    "arb", "ben", "bul", "cat", "ces", "cmn", "dan", "deu", "ell", "eng", "est", "fas", "fin", "fra",
    "heb", "hin", "hun", "ind", "ita", "nld", "pol", "por", "rus", "slk", "spa", "swh", "tgl", "tur",
    "urd", "vie",
];

/// Open set of accepted language codes, seeded with [`SEED_LANGUAGES`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRegistry {
    codes: BTreeSet<String>,
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self {
            codes: SEED_LANGUAGES.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl LanguageRegistry {
    pub fn register(&mut self, code: impl Into<String>) {
        self.codes.insert(code.into());
    }

    pub fn contains(&self, code: &str) -> bool {
        self.codes.contains(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}
