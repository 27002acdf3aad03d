use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{ToxicityCategory, Verdict};

/// Paralinguistic signals of toxicity in speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Effect {
    RaisedVoice,
    AggressiveTone,
    VeiledThreat,
}

impl Effect {
    pub const ALL: [Effect; 3] = [Effect::RaisedVoice, Effect::AggressiveTone, Effect::VeiledThreat];

    pub fn as_str(self) -> &'static str {
        match self {
            Effect::RaisedVoice => "RaisedVoice",
            Effect::AggressiveTone => "AggressiveTone",
            Effect::VeiledThreat => "VeiledThreat",
        }
    }
}

impl std::str::FromStr for Effect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Effect::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown effect `{s}` (expected RaisedVoice, AggressiveTone or VeiledThreat)"))
    }
}

/// A rejected response: `rule` is a stable machine-readable name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{rule}: {detail}")]
pub struct ValidationError {
    pub rule: String,
    pub detail: String,
}

impl ValidationError {
    pub fn new(rule: &str, detail: impl Into<String>) -> Self {
        Self {
            rule: rule.into(),
            detail: detail.into(),
        }
    }
}

/// A validated questionnaire answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationResponse {
    pub task_id: u64,
    pub annotator_id: String,
    pub verdict: Verdict,
    pub categories: BTreeSet<ToxicityCategory>,
    pub toxic_spans: Vec<String>,
    pub effects: BTreeSet<Effect>,
    pub timestamp: Option<DateTime<Utc>>,
}

/// Response as received over the wire, with enum fields still as strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub task_id: u64,
    pub annotator_id: String,
    pub verdict: String,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub toxic_spans: Vec<String>,
    #[serde(default)]
    pub effects: Vec<String>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

impl RawResponse {
    pub fn validate(self) -> Result<AnnotationResponse, ValidationError> {
        let verdict: Verdict = self
            .verdict
            .parse()
            .map_err(|e: String| ValidationError::new("unknown_verdict", e))?;
        let categories = self
            .categories
            .iter()
            .map(|c| c.parse())
            .collect::<Result<BTreeSet<ToxicityCategory>, String>>()
            .map_err(|e| ValidationError::new("unknown_category", e))?;
        let effects = self
            .effects
            .iter()
            .map(|e| e.parse())
            .collect::<Result<BTreeSet<Effect>, String>>()
            .map_err(|e| ValidationError::new("unknown_effect", e))?;
        let response = AnnotationResponse {
            task_id: self.task_id,
            annotator_id: self.annotator_id,
            verdict,
            categories,
            toxic_spans: self.toxic_spans,
            effects,
            timestamp: self.timestamp,
        };
        response.check()?;
        Ok(response)
    }
}

impl AnnotationResponse {
    /// Checks the questionnaire rules: a toxic verdict must say what the
    /// toxicity relates to (a span or an effect), and any other verdict
    /// carries no detail fields.
    pub fn check(&self) -> Result<(), ValidationError> {
        if self.annotator_id.trim().is_empty() {
            return Err(ValidationError::new("annotator_required", "annotator_id is empty"));
        }
        if self.toxic_spans.iter().any(|s| s.trim().is_empty()) {
            return Err(ValidationError::new("empty_span", "toxic spans must be non-empty strings"));
        }
        match self.verdict {
            Verdict::Toxic if self.toxic_spans.is_empty() && self.effects.is_empty() => Err(ValidationError::new(
                "q2_unanswered",
                "a Toxic verdict needs at least one toxic span or effect",
            )),
            Verdict::Toxic => Ok(()),
            v if !self.categories.is_empty() || !self.toxic_spans.is_empty() || !self.effects.is_empty() => {
                Err(ValidationError::new(
                    "fields_must_be_empty",
                    format!("verdict {v} must not carry categories, spans or effects"),
                ))
            }
            _ => Ok(()),
        }
    }
}
