use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{recall_at_fixed_precision, EvalError, FixedPrecisionResult, LabeledScores};
use crate::corpus::ToxicityCategory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecall {
    pub category: ToxicityCategory,
    pub n_toxic: usize,
    pub hits: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub threshold: FixedPrecisionResult,
    pub categories: Vec<CategoryRecall>,
    /// Categories without toxic items.
    pub omitted: Vec<ToxicityCategory>,
    /// Population variance of the per-category recalls.
    pub variance: Option<f64>,
}

/// Per-category recall at one global fixed-precision threshold.
pub fn category_breakdown(
    data: &LabeledScores,
    categories: &HashMap<String, BTreeSet<ToxicityCategory>>,
    baseline_precision: f64,
    floor: f64,
) -> Result<CategoryBreakdown, EvalError> {
    let threshold = recall_at_fixed_precision(data, baseline_precision, floor)?;
    let cut = threshold.chosen_threshold;
    let mut counts: HashMap<ToxicityCategory, (usize, usize)> = HashMap::new();
    for ((id, &score), &label) in data.ids().iter().zip(data.scores()).zip(data.labels()) {
        if !label {
            continue;
        }
        let cats = categories
            .get(id)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| EvalError::MissingCategory(id.clone()))?;
        for c in cats {
            let e = counts.entry(*c).or_default();
            e.0 += 1;
            if score >= cut {
                e.1 += 1;
            }
        }
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for c in ToxicityCategory::ALL {
        match counts.get(&c) {
            Some(&(n, hits)) => rows.push(CategoryRecall {
                category: c,
                n_toxic: n,
                hits,
                recall: hits as f64 / n as f64,
            }),
            None => omitted.push(c),
        }
    }
    let variance = (!rows.is_empty()).then(|| {
        let k = rows.len() as f64;
        let mean = rows.iter().map(|r| r.recall).sum::<f64>() / k;
        rows.iter().map(|r| (r.recall - mean).powi(2)).sum::<f64>() / k
    });
    Ok(CategoryBreakdown {
        threshold,
        categories: rows,
        omitted,
        variance,
    })
}
