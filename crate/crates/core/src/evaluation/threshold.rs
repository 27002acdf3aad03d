use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, LabeledScores};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No item scored at or above the threshold; `precision` is then 0.
    pub no_predictions: bool,
}

impl Prf {
    fn from_counts(threshold: f64, tp: usize, fp: usize, fn_: usize) -> Self {
        let no_predictions = tp + fp == 0;
        let precision = if no_predictions { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        Prf {
            threshold,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1(precision, recall),
            no_predictions,
        }
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn prf_at_threshold(data: &LabeledScores, threshold: f64) -> Prf {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&s, &y) in data.scores().iter().zip(data.labels()) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Prf::from_counts(threshold, tp, fp, fn_)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPrecisionResult {
    pub baseline_precision: f64,
    pub floor: f64,
    pub target_precision: f64,
    /// `+inf` when no finite threshold qualifies; serialized as `null`.
    #[serde(with = "inf_as_null")]
    pub chosen_threshold: f64,
    pub precision_at_threshold: f64,
    pub recall: f64,
    pub f1: f64,
    pub reachable: bool,
}

/// Recall at the threshold meeting `max(baseline_precision, floor)`.
///
/// Candidate thresholds are the distinct scores plus `+inf`. Among those
/// whose precision reaches the target, the one with maximal recall wins;
/// ties go to the lower threshold.
pub fn recall_at_fixed_precision(
    data: &LabeledScores,
    baseline_precision: f64,
    floor: f64,
) -> Result<FixedPrecisionResult, EvalError> {
    if !(0.0..=1.0).contains(&floor) {
        return Err(EvalError::InvalidFloor(floor));
    }
    let target = baseline_precision.max(floor);
    let total_pos = data.positives();
    let scores = data.scores();
    let labels = data.labels();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut best: Option<Prf> = None;
    let mut consider = |p: Prf| {
        if p.precision >= target
            && best
                .as_ref()
                .is_none_or(|b| p.recall > b.recall || (p.recall == b.recall && p.threshold < b.threshold))
        {
            best = Some(p);
        }
    };
    consider(Prf::from_counts(f64::INFINITY, 0, 0, total_pos));
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        consider(Prf::from_counts(t, tp, fp, total_pos - tp));
    }

    Ok(match best {
        Some(p) => FixedPrecisionResult {
            baseline_precision,
            floor,
            target_precision: target,
            chosen_threshold: p.threshold,
            precision_at_threshold: p.precision,
            recall: p.recall,
            f1: p.f1,
            reachable: true,
        },
        None => FixedPrecisionResult {
            baseline_precision,
            floor,
            target_precision: target,
            chosen_threshold: f64::INFINITY,
            precision_at_threshold: 0.0,
            recall: 0.0,
            f1: 0.0,
            reachable: false,
        },
    })
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Per-language precision floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTarget {
    pub floor: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Default for PrecisionTarget {
    /// Floor 0.3, lowered to 0.1 for swh and cat.
    fn default() -> Self {
        Self {
            floor: 0.3,
            overrides: [("cat".to_string(), 0.1), ("swh".to_string(), 0.1)].into(),
        }
    }
}

impl PrecisionTarget {
    pub fn floor_for(&self, lang: &str) -> f64 {
        self.overrides.get(lang).copied().unwrap_or(self.floor)
    }
}
