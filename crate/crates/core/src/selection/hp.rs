use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SelectionError, SelectionOutcome, Selected, Shortfall, Stage};
use crate::corpus::{DatasetManifest, ScoreCategory, ScoreSide, ScoreTable, Utterance};
use crate::rng::{derive_seed, seeded};
use crate::wordlist::LexicalDetection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpSelectionConfig {
    /// Stage 1 requires a detoxify score strictly above this.
    pub detox_threshold: f64,
    pub per_token_cap: usize,
    pub etox_stage_cap: usize,
    pub toxic_target: usize,
    pub total_target: usize,
    /// Languages scored natively by detoxify; others use the English side.
    pub native_detoxify_langs: BTreeSet<String>,
    pub provider: String,
    pub seed: u64,
}

impl Default for HpSelectionConfig {
    fn default() -> Self {
        Self {
            detox_threshold: 0.8,
            per_token_cap: 200,
            etox_stage_cap: 1000,
            toxic_target: 2500,
            total_target: 4000,
            native_detoxify_langs: ["ita", "por", "tur", "rus", "fra"].into_iter().map(String::from).collect(),
            provider: "detoxify".into(),
            seed: 0,
        }
    }
}

impl HpSelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.toxic_target > self.total_target {
            return Err(SelectionError::InvalidConfig(format!(
                "toxic_target {} exceeds total_target {}",
                self.toxic_target, self.total_target
            )));
        }
        if !(0.0..=1.0).contains(&self.detox_threshold) {
            return Err(SelectionError::InvalidConfig("detox_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn provider_score(table: &ScoreTable, id: &str, provider: &str) -> Option<(f64, ScoreSide)> {
    if let Some(r) = table.get(id, provider, ScoreCategory::Overall) {
        return Some((r.score, r.score_side));
    }
    ScoreCategory::TOXICITY
        .iter()
        .filter_map(|c| table.get(id, provider, *c))
        .map(|r| (r.score, r.score_side))
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
}

/// Detoxify toxicity for one utterance: the `overall` score, else the max
/// over categories. Native-language scores are used only for English and
/// languages in `native_langs`; otherwise the English-parallel score of the utterance
/// or, failing that, the score of its aligned English utterance.
pub fn detoxify_score(
    utt: &Utterance,
    table: &ScoreTable,
    native_langs: &BTreeSet<String>,
    provider: &str,
) -> Option<(f64, ScoreSide)> {
    let own = provider_score(table, &utt.id, provider);
    if utt.lang == "eng" || native_langs.contains(&utt.lang) {
        if let Some(s @ (_, ScoreSide::Native)) = own {
            return Some(s);
        }
    }
    if let Some(s @ (_, ScoreSide::EnglishParallel)) = own {
        return Some(s);
    }
    let eng = utt.parallel_eng_id.as_deref()?;
    provider_score(table, eng, provider).map(|(s, _)| (s, ScoreSide::EnglishParallel))
}

struct Candidate<'a> {
    utt: &'a Utterance,
    detection: &'a LexicalDetection,
    score: Option<(f64, ScoreSide)>,
}

fn tokens_label(d: &LexicalDetection) -> String {
    d.distinct_tokens().into_iter().collect::<Vec<_>>().join("|")
}

/// Three-stage per-language selection: lexical and classifier agreement,
/// capped lexical-only hits, top classifier scores, then a seeded random
/// fill up to `total_target`.
pub fn preselect_hp(
    manifest: &DatasetManifest,
    detections: &[LexicalDetection],
    detoxify: &ScoreTable,
    config: &HpSelectionConfig,
) -> Result<SelectionOutcome, SelectionError> {
    config.validate()?;
    let by_id: HashMap<&str, &LexicalDetection> = detections.iter().map(|d| (d.utterance_id.as_str(), d)).collect();
    let mut by_lang: std::collections::BTreeMap<&str, Vec<Candidate<'_>>> = Default::default();
    for utt in &manifest.utterances {
        let detection = by_id
            .get(utt.id.as_str())
            .ok_or_else(|| SelectionError::MissingDetection(utt.id.clone()))?;
        by_lang.entry(&utt.lang).or_default().push(Candidate {
            utt,
            detection,
            score: detoxify_score(utt, detoxify, &config.native_detoxify_langs, &config.provider),
        });
    }
    let per_lang: Vec<(Vec<Selected>, Option<Shortfall>)> = by_lang
        .into_par_iter()
        .map(|(lang, candidates)| select_language(lang, candidates, config))
        .collect();
    let mut out = SelectionOutcome::default();
    for (selected, shortfall) in per_lang {
        out.selected.extend(selected);
        out.shortfalls.extend(shortfall);
    }
    Ok(out)
}

fn select_language(
    lang: &str,
    mut candidates: Vec<Candidate<'_>>,
    cfg: &HpSelectionConfig,
) -> (Vec<Selected>, Option<Shortfall>) {
    candidates.sort_by(|a, b| {
        let sa = a.score.map_or(f64::NEG_INFINITY, |s| s.0);
        let sb = b.score.map_or(f64::NEG_INFINITY, |s| s.0);
        sb.total_cmp(&sa).then_with(|| a.utt.id.cmp(&b.utt.id))
    });
    let mut taken = vec![false; candidates.len()];
    let mut out = Vec::new();
    let pick = |i: usize, stage: Stage, justification: String, out: &mut Vec<Selected>, taken: &mut [bool]| {
        taken[i] = true;
        out.push(Selected {
            id: candidates[i].utt.id.clone(),
            lang: lang.to_string(),
            stage,
            justification,
            score: candidates[i].score.map(|s| s.0),
        });
    };

    for (i, c) in candidates.iter().enumerate() {
        if c.detection.is_toxic && c.score.is_some_and(|s| s.0 > cfg.detox_threshold) {
            pick(i, Stage::Intersection, tokens_label(c.detection), &mut out, &mut taken);
        }
    }

    let mut toxic = out.len();
    let mut stage2 = 0;
    let mut per_token: HashMap<String, usize> = HashMap::new();
    for (i, c) in candidates.iter().enumerate() {
        if toxic >= cfg.toxic_target || stage2 >= cfg.etox_stage_cap {
            break;
        }
        if taken[i] || !c.detection.is_toxic {
            continue;
        }
        let tokens = c.detection.distinct_tokens();
        if tokens.iter().any(|t| per_token.get(*t).copied().unwrap_or(0) >= cfg.per_token_cap) {
            continue;
        }
        for t in &tokens {
            *per_token.entry(t.to_string()).or_default() += 1;
        }
        pick(i, Stage::EtoxOnly, tokens_label(c.detection), &mut out, &mut taken);
        stage2 += 1;
        toxic += 1;
    }

    for (i, c) in candidates.iter().enumerate() {
        if toxic >= cfg.toxic_target {
            break;
        }
        if taken[i] {
            continue;
        }
        if let Some((_, side)) = c.score {
            pick(i, Stage::Detoxify, side.as_str().to_string(), &mut out, &mut taken);
            toxic += 1;
        }
    }

    let mut rest: Vec<usize> = (0..candidates.len()).filter(|&i| !taken[i]).collect();
    rest.sort_by(|&a, &b| candidates[a].utt.id.cmp(&candidates[b].utt.id));
    rest.shuffle(&mut seeded(derive_seed(cfg.seed, &format!("hp/{lang}"))));
    let room = cfg.total_target.saturating_sub(out.len());
    for &i in rest.iter().take(room) {
        pick(i, Stage::RandomFill, "seeded".into(), &mut out, &mut taken);
    }

    let shortfall = (candidates.len() < cfg.total_target).then(|| Shortfall {
        stratum: lang.to_string(),
        requested: cfg.total_target,
        available: candidates.len(),
    });
    (out, shortfall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Modality, ScoreRecord};

    fn utt(id: &str, lang: &str) -> Utterance {
        Utterance {
            id: id.into(),
            lang: lang.into(),
            modality: Modality::Speech,
            duration_s: None,
            transcript: None,
            audio_path: None,
            source: "web".into(),
            parallel_eng_id: None,
        }
    }

    fn det(id: &str, tokens: &[&str]) -> LexicalDetection {
        LexicalDetection {
            utterance_id: id.into(),
            matched_tokens: tokens.iter().map(|t| t.to_string()).collect(),
            is_toxic: !tokens.is_empty(),
        }
    }

    fn overall(id: &str, score: f64, side: ScoreSide) -> ScoreRecord {
        ScoreRecord {
            utterance_id: id.into(),
            provider: "detoxify".into(),
            category: ScoreCategory::Overall,
            score,
            score_side: side,
        }
    }

    #[test]
    fn intersection_stage_is_strict() {
        let manifest = DatasetManifest {
            utterances: vec![utt("a", "ita"), utt("b", "ita")],
            provenance: vec![],
        };
        let dets = vec![det("a", &["x"]), det("b", &["x"])];
        let table = ScoreTable::from_records([overall("a", 0.9, ScoreSide::Native), overall("b", 0.8, ScoreSide::Native)])
            .unwrap();
        let out = preselect_hp(&manifest, &dets, &table, &HpSelectionConfig::default()).unwrap();
        assert_eq!(out.selected[0].id, "a");
        assert_eq!(out.selected[0].stage, Stage::Intersection);
        assert_eq!(out.selected[1].stage, Stage::EtoxOnly);
    }

    #[test]
    fn score_side_resolution() {
        let native: BTreeSet<String> = ["ita".to_string()].into();
        let table = ScoreTable::from_records([
            overall("it", 0.3, ScoreSide::Native),
            overall("pl", 0.4, ScoreSide::Native),
            overall("en", 0.7, ScoreSide::Native),
        ])
        .unwrap();
        assert_eq!(
            detoxify_score(&utt("it", "ita"), &table, &native, "detoxify"),
            Some((0.3, ScoreSide::Native))
        );
        let mut pl = utt("pl", "pol");
        assert_eq!(detoxify_score(&pl, &table, &native, "detoxify"), None);
        pl.parallel_eng_id = Some("en".into());
        assert_eq!(
            detoxify_score(&pl, &table, &native, "detoxify"),
            Some((0.7, ScoreSide::EnglishParallel))
        );
    }

    #[test]
    fn missing_detection_is_an_error() {
        let manifest = DatasetManifest {
            utterances: vec![utt("a", "pol")],
            provenance: vec![],
        };
        assert!(matches!(
            preselect_hp(&manifest, &[], &ScoreTable::default(), &HpSelectionConfig::default()),
            Err(SelectionError::MissingDetection(_))
        ));
    }
}
