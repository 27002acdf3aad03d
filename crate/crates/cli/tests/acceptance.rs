//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mutox::classifier::{
    self, bce_grad, bce_with_logits, param_count, LabeledEmbedding, MlpConfig, MlpModel, TrainConfig,
};
use mutox::corpus::{
    DatasetManifest, EmbeddingRecord, Modality, ScoreCategory, ScoreRecord, ScoreSide, ScoreTable, ToxicityCategory,
    Utterance,
};
use mutox::evaluation::{
    emit_report, evaluate, pearson_matrix, rank_auc, recall_at_fixed_precision, EvalConfig, EvalItem, LabeledScores,
    ProviderScores,
};
use mutox::rng::{derive_seed, seeded, unit_f64, SplitMix64};
use mutox::selection::{apportion, make_splits, preselect_hp, HpSelectionConfig, SplitConfig, SplitItem, Stage};
use mutox::wordlist::{self, parse_wordlist, tokenize, LexicalDetection, MatchMode, WordList, WordlistError};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal(rng: &mut SplitMix64) -> f64 {
    let u1 = unit_f64(rng).max(1e-300);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn below(rng: &mut SplitMix64, n: usize) -> usize {
    ((unit_f64(rng) * n as f64) as usize).min(n - 1)
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn param_count_check() -> Check {
    let n = param_count(&MlpConfig::new(1024, vec![512, 128], 0)).map_err(|e| e.to_string())?;
    ensure(n == 590_593, || format!("got {n}"))?;
    Ok(format!("{n} parameters"))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        // Random biases keep pre-activations off the ReLU kink at zero.
        let config = MlpConfig::new(5, vec![4, 3], seed);
        let mut rng = seeded(derive_seed(seed, "gradcheck.data"));
        let params = (0..param_count(&config).map_err(|e| e.to_string())?)
            .map(|_| normal(&mut rng))
            .collect();
        let mut model = MlpModel::<f64>::from_params(config, params).map_err(|e| e.to_string())?;
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| normal(&mut rng)).collect()).collect();
        let labels: Vec<bool> = (0..4).map(|_| unit_f64(&mut rng) < 0.5).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let pw = 1.0 + (seed % 3) as f64;
        let (_, grad) = model.loss_and_grad(&refs, &labels, pw).map_err(|e| e.to_string())?;
        for p in 0..grad.0.len() {
            let orig = model.params()[p];
            model.params_mut()[p] = orig + h;
            let plus = model.loss(&refs, &labels, pw).map_err(|e| e.to_string())?;
            model.params_mut()[p] = orig - h;
            let minus = model.loss(&refs, &labels, pw).map_err(|e| e.to_string())?;
            model.params_mut()[p] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grad.0[p];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    within_time(start, Duration::from_secs(10))?;
    Ok(format!("max relative error {worst:.2e} in {:.2?}", start.elapsed()))
}

fn gaussian_set(rng: &mut SplitMix64, n: usize) -> Vec<LabeledEmbedding> {
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let shift = if label { 0.6 } else { -0.6 };
            LabeledEmbedding {
                utterance_id: format!("g{i}"),
                lang: "eng".into(),
                modality: Modality::Speech,
                vector: (0..16).map(|_| (shift + normal(rng)) as f32).collect(),
                label,
            }
        })
        .collect()
}

fn training_sanity() -> Check {
    let start = Instant::now();
    let mut rng = seeded(11);
    let train = gaussian_set(&mut rng, 1000);
    let dev = gaussian_set(&mut rng, 200);
    let held_out = gaussian_set(&mut rng, 400);
    let mlp = MlpConfig::new(16, vec![64, 32], 5);
    let cfg = TrainConfig {
        max_epochs: 200,
        batch_size: 64,
        seed: 6,
        ..TrainConfig::default()
    };
    let (model, report) = classifier::train(&train, &dev, &mlp, &cfg).map_err(|e| e.to_string())?;
    let (again, report2) = classifier::train(&train, &dev, &mlp, &cfg).map_err(|e| e.to_string())?;
    ensure(report.stopped_epoch <= 200, || format!("ran {} epochs", report.stopped_epoch))?;
    ensure(report == report2 && model.params() == again.params(), || "training is not deterministic".into())?;
    let scores: Vec<f64> = held_out
        .iter()
        .map(|e| model.forward_logit(&e.vector).map(f64::from))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let labels: Vec<bool> = held_out.iter().map(|e| e.label).collect();
    let auc = rank_auc(&scores, &labels).map_err(|e| e.to_string())?;
    ensure(auc >= 0.99, || format!("held-out AUC {auc}"))?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "held-out AUC {auc:.4} after {} epochs in {:.2?}",
        report.stopped_epoch,
        start.elapsed()
    ))
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random binary-labeled scores with both classes present; half the
/// instances are quantized so that ties are common.
fn random_instance(rng: &mut SplitMix64, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = 2 + below(rng, max_n - 1);
        let levels = if unit_f64(rng) < 0.5 { Some(2 + below(rng, 10)) } else { None };
        let p = 0.1 + 0.8 * unit_f64(rng);
        let labels: Vec<bool> = (0..n).map(|_| unit_f64(rng) < p).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let scores = labels
            .iter()
            .map(|&l| {
                let s = (unit_f64(rng) + if l { 0.3 } else { 0.0 }).min(1.0);
                match levels {
                    Some(k) => (s * k as f64).floor() / k as f64,
                    None => s,
                }
            })
            .collect();
        return (scores, labels);
    }
}

fn auc_oracle() -> Check {
    let mut rng = seeded(101);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (scores, labels) = random_instance(&mut rng, 200);
        let fast = rank_auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((fast - pairwise_auc(&scores, &labels)).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e} over 500 instances"))
}

/// (threshold, precision, recall) by sweeping every candidate threshold with
/// direct counting; `None` when no threshold meets the target.
fn brute_force_rafp(scores: &[f64], labels: &[bool], target: f64) -> Option<(f64, f64, f64)> {
    let positives = labels.iter().filter(|&&l| l).count();
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.push(f64::INFINITY);
    let mut best: Option<(f64, f64, f64)> = None;
    for &t in &candidates {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l).count();
        let fp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && !**l).count();
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if positives == 0 { 0.0 } else { tp as f64 / positives as f64 };
        if precision < target {
            continue;
        }
        let better = match best {
            None => true,
            Some((bt, _, br)) => recall > br || (recall == br && t < bt),
        };
        if better {
            best = Some((t, precision, recall));
        }
    }
    best
}

fn rafp_check() -> Check {
    let mut rng = seeded(202);
    let (mut by_floor_03, mut by_floor_01, mut by_baseline) = (0, 0, 0);
    for k in 0..500 {
        let (scores, labels) = random_instance(&mut rng, 200);
        let floor = if k % 2 == 0 { 0.3 } else { 0.1 };
        let baseline = 0.6 * unit_f64(&mut rng);
        let data = LabeledScores::from_pairs(scores.clone(), labels.clone()).map_err(|e| e.to_string())?;
        let got = recall_at_fixed_precision(&data, baseline, floor).map_err(|e| e.to_string())?;
        let target = baseline.max(floor);
        ensure(got.target_precision == target, || format!("instance {k}: target {}", got.target_precision))?;
        if baseline > floor {
            by_baseline += 1;
        } else if floor == 0.3 {
            by_floor_03 += 1;
        } else {
            by_floor_01 += 1;
        }
        match brute_force_rafp(&scores, &labels, target) {
            Some((t, p, r)) => ensure(
                got.reachable && got.chosen_threshold == t && got.precision_at_threshold == p && got.recall == r,
                || {
                    format!(
                        "instance {k}: got ({}, {}, {}), oracle ({t}, {p}, {r})",
                        got.chosen_threshold, got.precision_at_threshold, got.recall
                    )
                },
            )?,
            None => ensure(!got.reachable && got.recall == 0.0, || format!("instance {k}: oracle found no threshold"))?,
        }
    }
    ensure(by_floor_03 > 0 && by_floor_01 > 0 && by_baseline > 0, || "a target rule was not exercised".into())?;
    Ok(format!(
        "500 instances exact; target from floor 0.3: {by_floor_03}, floor 0.1: {by_floor_01}, baseline: {by_baseline}"
    ))
}

fn split_check() -> Check {
    let ratios = [0.70, 0.05, 0.10, 0.15];
    let sizes = apportion(19_453, &ratios);
    ensure(sizes == [13_617, 973, 1_945, 2_918], || format!("apportion gave {sizes:?}"))?;
    let items: Vec<SplitItem> = (0..19_453)
        .map(|i| SplitItem {
            id: format!("eng{i}"),
            stratum: "eng".into(),
        })
        .collect();
    let out = make_splits(&items, &SplitConfig { ratios, seed: 1 }).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 4];
    for (_, s) in &out {
        counts[*s as usize] += 1;
    }
    ensure(counts == [13_617, 973, 1_945, 2_918], || format!("split sizes {counts:?}"))?;

    let mut rng = seeded(303);
    for k in 0..1000 {
        let n = 1 + below(&mut rng, 300);
        let strata = 1 + below(&mut rng, 5);
        let raw: Vec<f64> = (0..4).map(|_| unit_f64(&mut rng) + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let mut ratios = [0.0; 4];
        for (r, v) in ratios.iter_mut().zip(&raw) {
            *r = v / total;
        }
        let items: Vec<SplitItem> = (0..n)
            .map(|i| SplitItem {
                id: format!("x{i}"),
                stratum: format!("s{}", below(&mut rng, strata)),
            })
            .collect();
        let cfg = SplitConfig {
            ratios,
            seed: k as u64,
        };
        let out = make_splits(&items, &cfg).map_err(|e| format!("instance {k}: {e}"))?;
        ensure(out == make_splits(&items, &cfg).map_err(|e| e.to_string())?, || format!("instance {k}: not deterministic"))?;
        ensure(out.len() == n, || format!("instance {k}: {} of {n} items assigned", out.len()))?;
        ensure(out.iter().zip(&items).all(|((id, _), it)| *id == it.id), || format!("instance {k}: order or ids changed"))?;
        let mut per_stratum: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
        for ((_, s), it) in out.iter().zip(&items) {
            per_stratum.entry(&it.stratum).or_default()[*s as usize] += 1;
        }
        for (stratum, got) in per_stratum {
            let size: usize = got.iter().sum();
            let want = apportion(size, &ratios);
            ensure(got.as_slice() == want.as_slice(), || format!("instance {k}, stratum {stratum}: {got:?} vs {want:?}"))?;
        }
    }
    Ok("19,453 -> (13,617, 973, 1,945, 2,918); 1,000 random partitions valid".into())
}

struct HpInstance {
    manifest: DatasetManifest,
    detections: Vec<LexicalDetection>,
    scores: ScoreTable,
}

fn hp_instance(rng: &mut SplitMix64, per_lang: usize) -> HpInstance {
    let vocab = 3 + below(rng, 28);
    let hit_rate = 0.2 + 0.5 * unit_f64(rng);
    let mut utterances = Vec::new();
    let mut detections = Vec::new();
    let mut records = Vec::new();
    for lang in ["eng", "ita"] {
        for i in 0..per_lang {
            let id = format!("{lang}{i:05}");
            let mut tokens = Vec::new();
            if unit_f64(rng) < hit_rate {
                tokens.push(format!("t{}", below(rng, vocab)));
                if unit_f64(rng) < 0.3 {
                    tokens.push(format!("t{}", below(rng, vocab)));
                }
            }
            detections.push(LexicalDetection {
                utterance_id: id.clone(),
                is_toxic: !tokens.is_empty(),
                matched_tokens: tokens,
            });
            if unit_f64(rng) < 0.9 {
                records.push(ScoreRecord {
                    utterance_id: id.clone(),
                    provider: "detoxify".into(),
                    category: ScoreCategory::Overall,
                    score: unit_f64(rng),
                    score_side: ScoreSide::Native,
                });
            }
            utterances.push(Utterance {
                id,
                lang: lang.into(),
                modality: Modality::Speech,
                duration_s: None,
                transcript: None,
                audio_path: None,
                source: "web".into(),
                parallel_eng_id: None,
            });
        }
    }
    HpInstance {
        manifest: DatasetManifest {
            utterances,
            provenance: Vec::new(),
        },
        detections,
        scores: ScoreTable::from_records(records).expect("valid scores"),
    }
}

fn hp_check() -> Check {
    let mut rng = seeded(404);
    let mut binding_token_cap = 0;
    let mut binding_stage_cap = 0;
    for k in 0..6 {
        let inst = hp_instance(&mut rng, 6000);
        let cfg = HpSelectionConfig {
            seed: k,
            ..HpSelectionConfig::default()
        };
        ensure(
            (cfg.detox_threshold, cfg.per_token_cap, cfg.etox_stage_cap, cfg.toxic_target, cfg.total_target)
                == (0.8, 200, 1000, 2500, 4000),
            || "default caps differ".into(),
        )?;
        let out = preselect_hp(&inst.manifest, &inst.detections, &inst.scores, &cfg).map_err(|e| e.to_string())?;
        let again = preselect_hp(&inst.manifest, &inst.detections, &inst.scores, &cfg).map_err(|e| e.to_string())?;
        ensure(out.selected == again.selected, || format!("instance {k}: not deterministic"))?;

        let dets: HashMap<&str, &LexicalDetection> = inst.detections.iter().map(|d| (d.utterance_id.as_str(), d)).collect();
        let score = |id: &str| inst.scores.get(id, "detoxify", ScoreCategory::Overall).map(|r| r.score);
        for lang in ["eng", "ita"] {
            let sel: Vec<_> = out.selected.iter().filter(|s| s.lang == lang).collect();
            let ids: HashSet<&str> = sel.iter().map(|s| s.id.as_str()).collect();
            ensure(ids.len() == sel.len(), || format!("instance {k}/{lang}: an item is in two stages"))?;
            let stage1: HashSet<&str> = inst
                .manifest
                .utterances
                .iter()
                .filter(|u| u.lang == lang && dets[u.id.as_str()].is_toxic && score(&u.id).is_some_and(|s| s > 0.8))
                .map(|u| u.id.as_str())
                .collect();
            let tagged: HashSet<&str> = sel
                .iter()
                .filter(|s| s.stage == Stage::Intersection)
                .map(|s| s.id.as_str())
                .collect();
            ensure(tagged == stage1, || format!("instance {k}/{lang}: intersection stage incomplete"))?;
            let mut per_token: HashMap<&str, usize> = HashMap::new();
            let mut stage2 = 0;
            for s in sel.iter().filter(|s| s.stage == Stage::EtoxOnly) {
                stage2 += 1;
                for t in dets[s.id.as_str()].distinct_tokens() {
                    *per_token.entry(t).or_default() += 1;
                }
            }
            let max_token = per_token.values().copied().max().unwrap_or(0);
            ensure(max_token <= 200, || format!("instance {k}/{lang}: token used {max_token} times"))?;
            ensure(stage2 <= 1000, || format!("instance {k}/{lang}: {stage2} etox-stage items"))?;
            binding_token_cap += usize::from(max_token == 200);
            binding_stage_cap += usize::from(stage2 == 1000);
            let toxic = sel.iter().filter(|s| s.stage.is_toxic()).count();
            let want_toxic = 2500.max(stage1.len());
            ensure(toxic == want_toxic, || format!("instance {k}/{lang}: {toxic} toxic, expected {want_toxic}"))?;
            ensure(sel.len() == 4000, || format!("instance {k}/{lang}: {} selected", sel.len()))?;
        }

        let reseeded = HpSelectionConfig {
            seed: k + 1000,
            ..cfg.clone()
        };
        let other = preselect_hp(&inst.manifest, &inst.detections, &inst.scores, &reseeded).map_err(|e| e.to_string())?;
        let toxic_ids = |o: &mutox::selection::SelectionOutcome| -> BTreeSet<String> {
            o.selected.iter().filter(|s| s.stage.is_toxic()).map(|s| s.id.clone()).collect()
        };
        ensure(toxic_ids(&out) == toxic_ids(&other), || format!("instance {k}: seed changed a toxic stage"))?;
    }
    ensure(binding_token_cap > 0 && binding_stage_cap > 0, || "caps were never binding".into())?;
    Ok(format!(
        "6 instances x 2 languages; per-token cap binding {binding_token_cap}x, stage cap binding {binding_stage_cap}x"
    ))
}

fn bce_check() -> Check {
    let cases: [(f64, bool, f64); 6] = [
        (0.0, true, std::f64::consts::LN_2),
        (20.0, true, 2.061_153_620_314_380_7e-9),
        (1e4, true, 0.0),
        (-1e4, true, 1e4),
        (1e4, false, 1e4),
        (-1e4, false, 0.0),
    ];
    for (z, y, want) in cases {
        let got: f64 = bce_with_logits(z, y, 1.0);
        ensure(got.is_finite() && (got - want).abs() <= 1e-9, || format!("z={z}, y={y}: {got} vs {want}"))?;
        let g: f64 = bce_grad(z, y, 1.0);
        ensure(g.is_finite(), || format!("z={z}, y={y}: gradient {g}"))?;
    }
    Ok("ln 2, 2.061e-9 and |z| = 1e4 within 1e-9".into())
}

fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn pearson_check() -> Check {
    let mut rng = seeded(505);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = 3 + below(&mut rng, 100);
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + normal(&mut rng)).collect();
        let (a, b) = (0.1 + 5.0 * unit_f64(&mut rng), 10.0 * normal(&mut rng));
        let (c, d) = (-(0.1 + 5.0 * unit_f64(&mut rng)), 10.0 * normal(&mut rng));
        let sets = vec![
            ("x".to_string(), x.clone()),
            ("y".to_string(), y.clone()),
            ("ax+b".to_string(), x.iter().map(|v| a * v + b).collect()),
            ("cy+d".to_string(), y.iter().map(|v| c * v + d).collect()),
        ];
        let m = pearson_matrix(&sets).map_err(|e| format!("pair {k}: {e}"))?;
        let r = |p: &str, q: &str| m.get(p, q).expect("provider present");
        let base = naive_pearson(&x, &y);
        let mut devs = vec![
            (r("x", "y") - base).abs(),
            (r("ax+b", "y") - base).abs(),
            (r("x", "cy+d") + base).abs(),
            (r("ax+b", "cy+d") + base).abs(),
            (r("x", "ax+b") - 1.0).abs(),
        ];
        for i in 0..4 {
            devs.push((m.values[i][i] - 1.0).abs());
            for j in 0..4 {
                devs.push((m.values[i][j] - m.values[j][i]).abs());
            }
        }
        worst = devs.into_iter().fold(worst, f64::max);
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e} over 200 pairs"))
}

fn wordlist_check() -> Check {
    let list = |entries: &[&str], mode| WordList::new("eng", mode, entries.iter().copied()).expect("valid list");
    let fixtures: [(&str, &[&str], MatchMode, &[&str]); 4] = [
        ("school sucks!", &["sucks"], MatchMode::Token, &["sucks"]),
        ("SHIT happens.", &["shit"], MatchMode::Token, &["shit"]),
        ("abcab", &["ab"], MatchMode::Substring, &["ab", "ab"]),
        ("nothing to see", &["sucks"], MatchMode::Token, &[]),
    ];
    for (text, entries, mode, want) in fixtures {
        let d = wordlist::detect("u", text, &list(entries, mode));
        ensure(d.matched_tokens == want && d.is_toxic == !want.is_empty(), || format!("`{text}`: {d:?}"))?;
    }
    let l = parse_wordlist("eng", "# slurs\nshit\nShit\n").map_err(|e| e.to_string())?;
    ensure(l.len() == 1 && l.match_mode() == MatchMode::Token, || "fold and dedupe failed".into())?;
    ensure(matches!(parse_wordlist("eng", "# a\n# b\n"), Err(WordlistError::Empty(_))), || "comment-only list accepted".into())?;
    let l = parse_wordlist("eng", "!match: substring\nab\n").map_err(|e| e.to_string())?;
    ensure(l.match_mode() == MatchMode::Substring, || "directive ignored".into())?;

    let mut rng = seeded(606);
    let alphabet = ["ab", "Ab", "ba", "abc", "b", "ä", "ÄB", "x y", "q"];
    let punct = ["", "!", ",", "...", "\"", "("];
    for k in 0..500 {
        let mode = if k % 2 == 0 { MatchMode::Token } else { MatchMode::Substring };
        let pick_entries = |rng: &mut SplitMix64, n: usize| -> Vec<&str> { (0..n).map(|_| alphabet[below(rng, alphabet.len())]).collect() };
        let n_base = 1 + below(&mut rng, 4);
        let base_entries = pick_entries(&mut rng, n_base);
        let n_extra = 1 + below(&mut rng, 4);
        let extra = pick_entries(&mut rng, n_extra);
        let text: Vec<String> = (0..below(&mut rng, 12))
            .map(|_| {
                let p = punct[below(&mut rng, punct.len())];
                format!("{p}{}{p}", alphabet[below(&mut rng, alphabet.len())])
            })
            .collect();
        let text = text.join(" ");
        let base = list(&base_entries, mode);
        let grown = base.with_entries(extra).map_err(|e| e.to_string())?;
        let d = wordlist::detect("u", &text, &base);
        ensure(d == wordlist::detect("u", &text, &base), || format!("case {k}: detect not pure"))?;
        ensure(d.is_toxic == !d.matched_tokens.is_empty(), || format!("case {k}: is_toxic inconsistent"))?;
        let tokens: HashSet<String> = tokenize(&text).into_iter().collect();
        for m in &d.matched_tokens {
            ensure(base.contains(m), || format!("case {k}: `{m}` is not an entry"))?;
            if mode == MatchMode::Token && !m.contains(' ') {
                ensure(tokens.contains(m), || format!("case {k}: `{m}` is not a token of `{text}`"))?;
            }
        }
        let mut remaining = wordlist::detect("u", &text, &grown).matched_tokens;
        for m in &d.matched_tokens {
            let pos = remaining.iter().position(|x| x == m);
            ensure(pos.is_some(), || format!("case {k}: adding entries removed `{m}`"))?;
            remaining.swap_remove(pos.expect("checked"));
        }
    }
    Ok("fixtures including `school sucks!`; 500 randomized purity and monotonicity cases".into())
}

fn round_trip_check() -> Check {
    let model = MlpModel::<f32>::init(MlpConfig::new(32, vec![16, 8], 77)).map_err(|e| e.to_string())?;
    let mut rng = seeded(707);
    let embeddings: Vec<EmbeddingRecord> = (0..100)
        .map(|i| EmbeddingRecord {
            utterance_id: format!("v{i}"),
            encoder_id: "test".into(),
            modality: None,
            vector: (0..32).map(|_| normal(&mut rng) as f32).collect(),
        })
        .collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.mtxm");
    classifier::persist_model(&model, &path).map_err(|e| e.to_string())?;
    let loaded = classifier::load_model(&path).map_err(|e| e.to_string())?;
    let before = classifier::score_batch(&model, &embeddings).map_err(|e| e.to_string())?;
    let after = classifier::score_batch(&loaded, &embeddings).map_err(|e| e.to_string())?;
    ensure(
        before.len() == 100 && before.iter().zip(&after).all(|(a, b)| a.score.to_bits() == b.score.to_bits()),
        || "scores differ after reload".into(),
    )?;
    Ok("100 scores bit-identical after persist and load".into())
}

fn f1_doubling_check() -> Check {
    let mut items = Vec::new();
    let mut etox = HashMap::new();
    let mut improved = HashMap::new();
    let mut add = |label: bool, e: f64, m: f64, n: usize| {
        for _ in 0..n {
            let id = format!("i{}", items.len());
            etox.insert(id.clone(), e);
            improved.insert(id.clone(), m);
            items.push(EvalItem {
                id,
                lang: "eng".into(),
                subset: "test".into(),
                label,
                categories: if label { [ToxicityCategory::Profanity].into() } else { BTreeSet::new() },
            });
        }
    };
    // Baseline: TP 19, FN 81, FP 81, TN 181. Improved: 38 of 100 hits above 0.9.
    add(true, 1.0, 0.9, 19);
    add(true, 0.0, 0.9, 19);
    add(true, 0.0, 0.1, 62);
    add(false, 1.0, 0.9, 62);
    add(false, 1.0, 0.1, 19);
    add(false, 0.0, 0.1, 181);
    let providers = vec![
        ProviderScores {
            provider: "etox".into(),
            scores: etox,
        },
        ProviderScores {
            provider: "mutox".into(),
            scores: improved,
        },
    ];
    let report = evaluate(&items, &providers, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let gain = report
        .f1_gains
        .iter()
        .find(|g| g.provider == "mutox")
        .ok_or("no F1 gain row for the improved scorer")?;
    ensure((gain.baseline_f1 - 0.19).abs() < 1e-12, || format!("baseline F1 {}", gain.baseline_f1))?;
    ensure((gain.f1 - 0.38).abs() < 1e-12, || format!("improved F1 {}", gain.f1))?;
    let pct = gain.relative_change_pct.ok_or("relative change undefined")?;
    ensure((pct - 100.0).abs() < 1e-9, || format!("relative change {pct}%"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_report(&report, dir.path()).map_err(|e| e.to_string())?;
    let csv = fs::read_to_string(dir.path().join("f1_gain.csv")).map_err(|e| e.to_string())?;
    ensure(csv.lines().any(|l| l.starts_with("mutox,test,etox,") && l.ends_with(",0.19,0.38,100")), || {
        format!("f1_gain.csv:\n{csv}")
    })?;
    Ok(format!("F1 0.19 -> 0.38 reported as +{pct}%"))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

fn copy_dir(src: &Path, dst: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dst)?;
    for e in fs::read_dir(src)? {
        let e = e?;
        let to = dst.join(e.file_name());
        if e.file_type()?.is_dir() {
            copy_dir(&e.path(), &to)?;
        } else {
            fs::copy(e.path(), to)?;
        }
    }
    Ok(())
}

fn read_tree(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            read_tree(root, &p, out)?;
        } else {
            out.insert(p.strip_prefix(root).expect("under root").to_path_buf(), fs::read(&p)?);
        }
    }
    Ok(())
}

const PIPELINE: &[&[&str]] = &[
    &["select-hp", "--manifest", "fx/manifest.tsv", "--scores", "fx/detoxify_scores.tsv", "--wordlists", "fx/wordlists", "--out", "out/sel", "--seed", "7"],
    &["split", "--manifest", "fx/manifest.tsv", "--labels", "fx/labels.tsv", "--selection", "out/sel/selection.tsv", "--out", "out/split", "--seed", "7"],
    &["train", "--manifest", "fx/manifest.tsv", "--labels", "fx/labels.tsv", "--splits", "out/split/splits.tsv", "--embeddings", "fx/speech.mtxe", "--out", "out/model", "--seed", "7"],
    &["score", "--model", "out/model/model.mtxm", "--embeddings", "fx/speech.mtxe", "--out", "out/scored"],
    &["eval", "--scores", "fx/detoxify_scores.tsv", "--scores", "out/sel/etox_scores.tsv", "--scores", "out/scored/scores.tsv", "--labels", "fx/labels.tsv", "--splits", "out/split/splits.tsv", "--out", "out/eval"],
    &["quantiles", "--scores", "fx/detoxify_scores.tsv", "--labels", "fx/labels.tsv", "--out", "out/quantiles"],
    &["wordlist-analyze", "--wordlists", "fx/wordlists", "--manifest", "fx/manifest.tsv", "--labels", "fx/labels.tsv", "--out", "out/wordlist"],
    &["report", "--eval", "out/eval", "--selection", "out/sel", "--quantiles", "out/quantiles", "--wordlist", "out/wordlist", "--out", "out/report"],
];

fn run_pipeline(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    copy_dir(&fixture_dir(), &root.join("fx")).map_err(|e| e.to_string())?;
    for step in PIPELINE {
        let out = Command::new(env!("CARGO_BIN_EXE_mutox"))
            .args(["--config", "fx/config.toml"])
            .args(*step)
            .current_dir(root)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("`{}` exited {:?}: {}", step[0], out.status.code(), String::from_utf8_lossy(&out.stderr))
        })?;
    }
    let mut tree = BTreeMap::new();
    read_tree(&root.join("out"), &root.join("out"), &mut tree).map_err(|e| e.to_string())?;
    Ok(tree)
}

fn end_to_end_check() -> Check {
    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::Builder::new()
        .prefix("second-root")
        .tempdir()
        .map_err(|e| e.to_string())?;
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(&b.path().join("nested"))?;
    within_time(start, Duration::from_secs(120))?;
    ensure(first.keys().eq(second.keys()), || "runs produced different file sets".into())?;
    for (path, bytes) in &first {
        ensure(second[path] == *bytes, || format!("{} differs between runs", path.display()))?;
    }
    for csv in ["category_counts", "stage_distribution", "quantile_curve", "category_recall", "token_scatter"] {
        let p = PathBuf::from(format!("report/{csv}.csv"));
        ensure(first.contains_key(&p), || format!("missing {}", p.display()))?;
    }
    Ok(format!(
        "{} steps twice, {} files byte-identical, {:.2?}",
        PIPELINE.len(),
        first.len(),
        start.elapsed()
    ))
}

fn run(name: &str, check: fn() -> Check) -> bool {
    let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match result {
        Ok(detail) => {
            println!("PASS {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            false
        }
    }
}

fn main() {
    let checks: [(&str, fn() -> Check); 13] = [
        ("parameter_count", param_count_check),
        ("gradient_check", gradient_check),
        ("training_sanity", training_sanity),
        ("auc_oracle", auc_oracle),
        ("recall_at_fixed_precision", rafp_check),
        ("split_apportionment", split_check),
        ("hp_selection_caps", hp_check),
        ("bce_stability", bce_check),
        ("pearson_matrix", pearson_check),
        ("wordlist_detection", wordlist_check),
        ("model_round_trip", round_trip_check),
        ("f1_doubling", f1_doubling_check),
        ("end_to_end", end_to_end_check),
    ];
    let failed = checks.iter().filter(|(name, f)| !run(name, *f)).count();
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
