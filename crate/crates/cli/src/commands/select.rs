use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use clap::Args;
use mutox::corpus::{self, ScoreCategory, ScoreRecord, ScoreSide};
use mutox::rng::derive_seed;
use mutox::selection::{
    self, make_splits, save_selection, save_splits, stratum_key, HpSelectionConfig,
    PrimarySelectionConfig, Quotas, SelectionOutcome, SplitConfig, SplitItem, Subset,
};
use mutox::evaluation::write_stage_distribution_csv;
use mutox::wordlist::{self, LexicalDetection};
use serde::Serialize;

use crate::common::{ensure_dir, load_labels, load_manifest, load_scores, parse_kv_list, CliError, CliResult, CsvText, RunContext};

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct PrimaryArgs {
    /// Utterance manifest TSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Score TSV files with per-category classifier scores (repeatable).
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline seed.
    #[arg(long)]
    pub seed: u64,
    /// Shortest kept duration in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub min_duration: f64,
    /// Longest kept duration in seconds.
    #[arg(long, default_value_t = 8.0)]
    pub max_duration: f64,
    /// Score at or above which a category qualifies.
    #[arg(long, default_value_t = 0.5)]
    pub category_threshold: f64,
    /// Clean items have every category score below this.
    #[arg(long, default_value_t = 0.5)]
    pub clean_threshold: f64,
    /// Toxic items per language, split across categories by pool size.
    #[arg(long, default_value_t = 1000)]
    pub toxic_total: usize,
    /// Explicit per-category quotas such as `insult=40,threat=10`; replaces --toxic-total.
    #[arg(long)]
    pub category_quotas: Option<String>,
    /// Clean items per language.
    #[arg(long, default_value_t = 1000)]
    pub clean_quota: usize,
    /// Provider name of the scores to use.
    #[arg(long, default_value = "detoxify")]
    pub provider: String,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct HpArgs {
    /// Utterance manifest TSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Score TSV files with classifier scores (repeatable).
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Directory of `<lang>.txt` wordlists.
    #[arg(long)]
    pub wordlists: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline seed.
    #[arg(long)]
    pub seed: u64,
    /// Classifier score an item must exceed for the intersection stage.
    #[arg(long, default_value_t = 0.8)]
    pub detox_threshold: f64,
    /// Most wordlist-only items per matched token.
    #[arg(long, default_value_t = 200)]
    pub per_token_cap: usize,
    /// Most wordlist-only items per language.
    #[arg(long, default_value_t = 1000)]
    pub etox_stage_cap: usize,
    /// Toxic-candidate items per language.
    #[arg(long, default_value_t = 2500)]
    pub toxic_target: usize,
    /// Total items per language, topped up at random.
    #[arg(long, default_value_t = 4000)]
    pub total_target: usize,
    /// Languages whose own text the classifier scores.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set, default_value = "ita,por,tur,rus,fra")]
    pub native_langs: Vec<String>,
    /// Provider name of the classifier scores.
    #[arg(long, default_value = "detoxify")]
    pub provider: String,
    /// Restrict to these languages.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub langs: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SplitArgs {
    /// Utterance manifest TSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Labels TSV; verdict and category feed the strata.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Selection TSV restricting the items to split.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline seed.
    #[arg(long)]
    pub seed: u64,
    /// Ratios for train, dev, devtest and test.
    #[arg(long, value_delimiter = ',', num_args = 4, action = clap::ArgAction::Set, default_value = "0.7,0.05,0.1,0.15")]
    pub ratios: Vec<f64>,
}

fn write_outcome(out: &Path, outcome: &SelectionOutcome) -> CliResult {
    save_selection(out.join("selection.tsv"), outcome)?;
    write_stage_distribution_csv(out, &outcome.stage_counts())?;
    let mut short = CsvText::new(&["stratum", "requested", "available"]);
    for s in &outcome.shortfalls {
        short.row([s.stratum.clone(), s.requested.to_string(), s.available.to_string()]);
    }
    short.write(&out.join("shortfalls.csv"))
}

pub fn primary(ctx: &RunContext, args: PrimaryArgs) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let scores = load_scores(&args.scores)?;
    let quotas = match &args.category_quotas {
        Some(text) => {
            let mut q = BTreeMap::new();
            for (k, v) in parse_kv_list(text, "--category-quotas")? {
                let cat: ScoreCategory = k.parse().map_err(CliError::Invalid)?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(CliError::invalid(format!("--category-quotas: `{v}` is not a count")));
                }
                q.insert(cat, v as usize);
            }
            Quotas::Explicit(q)
        }
        None => Quotas::Proportional { total: args.toxic_total },
    };
    let cfg = PrimarySelectionConfig {
        duration_range: (args.min_duration, args.max_duration),
        category_thresholds: ScoreCategory::TOXICITY
            .into_iter()
            .map(|c| (c, args.category_threshold))
            .collect(),
        clean_threshold: args.clean_threshold,
        quotas,
        clean_quota: args.clean_quota,
        provider: args.provider.clone(),
        seed: derive_seed(args.seed, "selection"),
    };
    let outcome = selection::preselect_primary(&manifest, &scores, &cfg)?;
    ensure_dir(&args.out)?;
    write_outcome(&args.out, &outcome)?;
    let inputs: Vec<&Path> = std::iter::once(args.manifest.as_path())
        .chain(args.scores.iter().map(PathBuf::as_path))
        .collect();
    ctx.write_manifest(&args.out, "select-primary", Some(args.seed), &args, &inputs)?;
    eprintln!("selected {} items into {}", outcome.len(), args.out.display());
    Ok(())
}

/// Wordlist detections for every utterance; items without a transcript or
/// a wordlist for their language match nothing.
fn detections(manifest: &corpus::DatasetManifest, wordlists: &Path) -> CliResult<Vec<LexicalDetection>> {
    let lists = wordlist::load_wordlist_dir(wordlists)?;
    Ok(manifest
        .utterances
        .iter()
        .map(|u| match (u.transcript.as_deref(), lists.get(&u.lang)) {
            (Some(text), Some(list)) => wordlist::detect(u.id.clone(), text, list),
            _ => LexicalDetection {
                utterance_id: u.id.clone(),
                matched_tokens: Vec::new(),
                is_toxic: false,
            },
        })
        .collect())
}

pub fn hp(ctx: &RunContext, args: HpArgs) -> CliResult {
    let mut manifest = load_manifest(&args.manifest)?;
    if let Some(langs) = &args.langs {
        manifest.utterances.retain(|u| langs.contains(&u.lang));
    }
    let scores = load_scores(&args.scores)?;
    let dets = detections(&manifest, &args.wordlists)?;
    let cfg = HpSelectionConfig {
        detox_threshold: args.detox_threshold,
        per_token_cap: args.per_token_cap,
        etox_stage_cap: args.etox_stage_cap,
        toxic_target: args.toxic_target,
        total_target: args.total_target,
        native_detoxify_langs: args.native_langs.iter().cloned().collect(),
        provider: args.provider.clone(),
        seed: derive_seed(args.seed, "selection"),
    };
    let outcome = selection::preselect_hp(&manifest, &dets, &scores, &cfg)?;
    ensure_dir(&args.out)?;
    write_outcome(&args.out, &outcome)?;

    let mut det_csv = CsvText::new(&["id", "lang", "is_toxic", "matched_tokens"]);
    let etox: Vec<ScoreRecord> = manifest
        .utterances
        .iter()
        .zip(&dets)
        .map(|(u, d)| {
            det_csv.row([
                d.utterance_id.clone(),
                u.lang.clone(),
                d.is_toxic.to_string(),
                d.matched_tokens.join("|"),
            ]);
            ScoreRecord {
                utterance_id: d.utterance_id.clone(),
                provider: "etox".into(),
                category: ScoreCategory::Overall,
                score: d.score(),
                score_side: ScoreSide::Native,
            }
        })
        .collect();
    det_csv.write(&args.out.join("detections.csv"))?;
    corpus::save_scores(args.out.join("etox_scores.tsv"), &etox)?;

    let inputs: Vec<&Path> = [args.manifest.as_path(), args.wordlists.as_path()]
        .into_iter()
        .chain(args.scores.iter().map(PathBuf::as_path))
        .collect();
    ctx.write_manifest(&args.out, "select-hp", Some(args.seed), &args, &inputs)?;
    eprintln!("selected {} items into {}", outcome.len(), args.out.display());
    Ok(())
}

fn category_bucket(categories: &BTreeSet<corpus::ToxicityCategory>) -> String {
    match categories.len() {
        0 => "none".into(),
        1 => categories.iter().next().expect("one category").to_string(),
        _ => "multi".into(),
    }
}

pub fn split(ctx: &RunContext, args: SplitArgs) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let labels = args.labels.as_deref().map(load_labels).transpose()?;
    let keep: Option<HashSet<String>> = match &args.selection {
        Some(p) => Some(selection::load_selection(p)?.ids().map(String::from).collect()),
        None => None,
    };
    let items: Vec<SplitItem> = manifest
        .utterances
        .iter()
        .filter(|u| keep.as_ref().is_none_or(|k| k.contains(&u.id)))
        .map(|u| {
            let label = labels.as_ref().and_then(|l| l.get(&u.id));
            let verdict = label.map_or("unlabeled".to_string(), |l| l.verdict.to_string());
            let bucket = label.map_or("none".to_string(), |l| category_bucket(&l.categories));
            SplitItem {
                id: u.id.clone(),
                stratum: format!("{}|{}", u.lang, stratum_key(&verdict, &bucket, &u.source)),
            }
        })
        .collect();
    let ratios: [f64; 4] = args
        .ratios
        .clone()
        .try_into()
        .map_err(|_| CliError::invalid("--ratios needs four values"))?;
    let cfg = SplitConfig {
        ratios,
        seed: derive_seed(args.seed, "split"),
    };
    let splits = make_splits(&items, &cfg)?;
    ensure_dir(&args.out)?;
    save_splits(args.out.join("splits.tsv"), &splits)?;

    let lang_of: std::collections::HashMap<&str, &str> =
        manifest.utterances.iter().map(|u| (u.id.as_str(), u.lang.as_str())).collect();
    let mut sizes: BTreeMap<(&str, Subset), usize> = BTreeMap::new();
    for (id, subset) in &splits {
        *sizes.entry((lang_of[id.as_str()], *subset)).or_default() += 1;
    }
    let mut csv = CsvText::new(&["lang", "subset", "count"]);
    for ((lang, subset), n) in sizes {
        csv.row([lang.to_string(), subset.to_string(), n.to_string()]);
    }
    csv.write(&args.out.join("split_sizes.csv"))?;

    let mut inputs: Vec<&Path> = vec![args.manifest.as_path()];
    inputs.extend(args.labels.as_deref());
    inputs.extend(args.selection.as_deref());
    ctx.write_manifest(&args.out, "split", Some(args.seed), &args, &inputs)?;
    eprintln!("split {} items into {}", splits.len(), args.out.display());
    Ok(())
}
