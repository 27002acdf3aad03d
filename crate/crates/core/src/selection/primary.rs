use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{apportion, SelectionError, SelectionOutcome, Selected, Shortfall, Stage};
use crate::corpus::{filter_by_duration, DatasetManifest, ScoreCategory, ScoreTable, Utterance};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Quotas {
    /// The same per-category count in every language.
    Explicit(BTreeMap<ScoreCategory, usize>),
    /// `total` toxic items per language, apportioned by category pool size.
    Proportional { total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimarySelectionConfig {
    pub duration_range: (f64, f64),
    pub category_thresholds: BTreeMap<ScoreCategory, f64>,
    /// Clean items have every category score below this.
    pub clean_threshold: f64,
    pub quotas: Quotas,
    pub clean_quota: usize,
    pub provider: String,
    pub seed: u64,
}

impl Default for PrimarySelectionConfig {
    fn default() -> Self {
        Self {
            duration_range: (2.0, 8.0),
            category_thresholds: ScoreCategory::TOXICITY.into_iter().map(|c| (c, 0.5)).collect(),
            clean_threshold: 0.5,
            quotas: Quotas::Proportional { total: 1000 },
            clean_quota: 1000,
            provider: "detoxify".into(),
            seed: 0,
        }
    }
}

impl PrimarySelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !self.category_thresholds.values().all(|t| in_unit(*t)) || !in_unit(self.clean_threshold) {
            return Err(SelectionError::InvalidConfig("thresholds must lie in [0, 1]".into()));
        }
        if !(self.duration_range.0 <= self.duration_range.1) {
            return Err(SelectionError::InvalidConfig(format!(
                "duration range {:?} is empty",
                self.duration_range
            )));
        }
        Ok(())
    }

    fn threshold(&self, c: ScoreCategory) -> f64 {
        self.category_thresholds.get(&c).copied().unwrap_or(0.5)
    }
}

struct Candidate<'a> {
    utt: &'a Utterance,
    scores: [f64; 6],
}

/// Duration screen, then per language a toxic pool sampled per argmax
/// category and a disjoint clean pool.
pub fn preselect_primary(
    manifest: &DatasetManifest,
    scores: &ScoreTable,
    config: &PrimarySelectionConfig,
) -> Result<SelectionOutcome, SelectionError> {
    config.validate()?;
    let (min_s, max_s) = config.duration_range;
    let kept = filter_by_duration(manifest, min_s, max_s)?;
    let mut by_lang: BTreeMap<&str, Vec<Candidate<'_>>> = BTreeMap::new();
    for utt in &kept.utterances {
        let mut s = [0.0; 6];
        for (slot, c) in s.iter_mut().zip(ScoreCategory::TOXICITY) {
            *slot = scores
                .get(&utt.id, &config.provider, c)
                .ok_or_else(|| SelectionError::MissingScore {
                    id: utt.id.clone(),
                    provider: config.provider.clone(),
                    category: c.to_string(),
                })?
                .score;
        }
        by_lang.entry(&utt.lang).or_default().push(Candidate { utt, scores: s });
    }

    let mut out = SelectionOutcome::default();
    for (lang, candidates) in by_lang {
        let mut toxic: BTreeMap<ScoreCategory, Vec<(&Candidate<'_>, f64)>> = BTreeMap::new();
        let mut clean = Vec::new();
        for c in &candidates {
            let mut best: Option<(ScoreCategory, f64)> = None;
            for (cat, &s) in ScoreCategory::TOXICITY.iter().zip(&c.scores) {
                if s >= config.threshold(*cat) && best.is_none_or(|(_, b)| s > b) {
                    best = Some((*cat, s));
                }
            }
            match best {
                Some((cat, s)) => toxic.entry(cat).or_default().push((c, s)),
                None if c.scores.iter().all(|s| *s < config.clean_threshold) => {
                    let max = c.scores.iter().copied().fold(0.0, f64::max);
                    clean.push((c, max));
                }
                None => {}
            }
        }

        let quotas: BTreeMap<ScoreCategory, usize> = match &config.quotas {
            Quotas::Explicit(q) => q.clone(),
            Quotas::Proportional { total } => {
                let pool: usize = toxic.values().map(Vec::len).sum();
                let cats: Vec<ScoreCategory> = toxic.keys().copied().collect();
                let ratios: Vec<f64> = toxic.values().map(|v| v.len() as f64 / pool.max(1) as f64).collect();
                if *total > pool {
                    out.shortfalls.push(Shortfall {
                        stratum: format!("{lang}/toxic"),
                        requested: *total,
                        available: pool,
                    });
                }
                cats.into_iter().zip(apportion((*total).min(pool), &ratios)).collect()
            }
        };

        for (cat, quota) in quotas {
            let pool = toxic.remove(&cat).unwrap_or_default();
            let label = format!("primary/{lang}/{cat}");
            for (c, s) in sample(pool, quota, config.seed, &label, &mut out.shortfalls) {
                out.selected.push(Selected {
                    id: c.utt.id.clone(),
                    lang: lang.to_string(),
                    stage: Stage::CategorySample,
                    justification: cat.to_string(),
                    score: Some(s),
                });
            }
        }
        let label = format!("primary/{lang}/clean");
        for (c, s) in sample(clean, config.clean_quota, config.seed, &label, &mut out.shortfalls) {
            out.selected.push(Selected {
                id: c.utt.id.clone(),
                lang: lang.to_string(),
                stage: Stage::CleanSample,
                justification: "clean".into(),
                score: Some(s),
            });
        }
    }
    Ok(out)
}

fn sample<'a, 'b>(
    mut pool: Vec<(&'b Candidate<'a>, f64)>,
    quota: usize,
    seed: u64,
    label: &str,
    shortfalls: &mut Vec<Shortfall>,
) -> Vec<(&'b Candidate<'a>, f64)> {
    if quota > pool.len() {
        shortfalls.push(Shortfall {
            stratum: label.trim_start_matches("primary/").to_string(),
            requested: quota,
            available: pool.len(),
        });
    }
    pool.sort_by(|a, b| a.0.utt.id.cmp(&b.0.utt.id));
    pool.shuffle(&mut seeded(derive_seed(seed, label)));
    pool.truncate(quota);
    pool.sort_by(|a, b| a.0.utt.id.cmp(&b.0.utt.id));
    pool
}
