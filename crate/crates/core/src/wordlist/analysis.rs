//! Per-token output/precision analysis of wordlist detections.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{LexicalDetection, WordlistError};
use crate::corpus::Verdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub token: String,
    /// Number of matches, with multiplicity.
    pub output_count: usize,
    /// Matches on items labelled toxic, with multiplicity.
    pub true_positive_count: usize,
    /// `true_positive_count / output_count`; absent when the token never fired.
    pub precision: Option<f64>,
    /// Distinct toxic items hit by this token.
    pub toxic_items: usize,
    /// `toxic_items` over all toxic items in the label set.
    pub recall_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    /// Sorted by token.
    pub tokens: Vec<TokenStats>,
    pub total_toxic_items: usize,
    /// Sum of per-token recall shares; exceeds the deduplicated share when
    /// tokens co-occur on the same item.
    pub raw_recall_share: f64,
    /// Share of toxic items hit by at least one token.
    pub dedup_recall_share: f64,
}

impl TokenReport {
    pub fn by_precision(&self) -> Vec<&TokenStats> {
        let mut out: Vec<&TokenStats> = self.tokens.iter().collect();
        out.sort_by(|a, b| {
            b.precision
                .unwrap_or(0.0)
                .total_cmp(&a.precision.unwrap_or(0.0))
                .then_with(|| a.token.cmp(&b.token))
        });
        out
    }

    pub fn by_output(&self) -> Vec<&TokenStats> {
        let mut out: Vec<&TokenStats> = self.tokens.iter().collect();
        out.sort_by(|a, b| b.output_count.cmp(&a.output_count).then_with(|| a.token.cmp(&b.token)));
        out
    }

    /// Tokens whose precision is strictly greater than `threshold`.
    pub fn count_precision_above(&self, threshold: f64) -> usize {
        self.tokens
            .iter()
            .filter(|t| t.precision.is_some_and(|p| p > threshold))
            .count()
    }
}

pub fn token_report(
    detections: &[LexicalDetection],
    labels: &HashMap<String, Verdict>,
) -> Result<TokenReport, WordlistError> {
    #[derive(Default)]
    struct Acc<'a> {
        output: usize,
        tp: usize,
        toxic_items: HashSet<&'a str>,
    }

    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut hit_toxic: HashSet<&str> = HashSet::new();
    for d in detections {
        let verdict = labels
            .get(&d.utterance_id)
            .ok_or_else(|| WordlistError::Unlabeled(d.utterance_id.clone()))?;
        let toxic = *verdict == Verdict::Toxic;
        for token in &d.matched_tokens {
            let a = acc.entry(token.as_str()).or_default();
            a.output += 1;
            if toxic {
                a.tp += 1;
                a.toxic_items.insert(d.utterance_id.as_str());
                hit_toxic.insert(d.utterance_id.as_str());
            }
        }
    }

    let total_toxic_items = labels.values().filter(|v| **v == Verdict::Toxic).count();
    let share = |n: usize| {
        if total_toxic_items == 0 {
            0.0
        } else {
            n as f64 / total_toxic_items as f64
        }
    };
    let tokens: Vec<TokenStats> = acc
        .into_iter()
        .map(|(token, a)| TokenStats {
            token: token.to_string(),
            output_count: a.output,
            true_positive_count: a.tp,
            precision: (a.output > 0).then(|| a.tp as f64 / a.output as f64),
            toxic_items: a.toxic_items.len(),
            recall_share: share(a.toxic_items.len()),
        })
        .collect();
    let raw_recall_share = tokens.iter().map(|t| t.recall_share).sum();
    Ok(TokenReport {
        tokens,
        total_toxic_items,
        raw_recall_share,
        dedup_recall_share: share(hit_toxic.len()),
    })
}
