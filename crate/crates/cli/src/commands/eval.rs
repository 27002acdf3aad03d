use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use clap::Args;
use mutox::corpus::{LabelSet, ToxicityCategory};
use mutox::evaluation::{
    self, align_scores, emit_report, fmt_sig6, pearson_matrix, quantile_report, write_quantiles_csv, EvalConfig,
    EvalItem, LanguageSubset, PrecisionTarget, ProviderScores,
};
use mutox::selection::{load_splits, Subset};
use mutox::wordlist::{self, LexicalDetection};
use serde::Serialize;

use crate::common::{
    ensure_dir, load_labels, load_manifest, load_scores, parse_kv_list, provider_scores, write_json, CliError,
    CliResult, CsvText, RunContext,
};

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    /// Score TSV files, one or more providers each (repeatable).
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Labels TSV; CannotSay items are skipped.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Splits TSV; without it every labeled item is evaluated as subset `all`.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Subsets to evaluate when --splits is given.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set, default_value = "devtest,test")]
    pub subsets: Vec<Subset>,
    /// Score at or above which an item counts as predicted toxic.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Provider whose precision sets the fixed-precision target; `none` disables it.
    #[arg(long, default_value = "etox")]
    pub baseline: String,
    /// Lowest precision target.
    #[arg(long, default_value_t = 0.3)]
    pub floor: f64,
    /// Per-language precision floors such as `cat=0.1,swh=0.1`.
    #[arg(long, default_value = "cat=0.1,swh=0.1")]
    pub floor_overrides: String,
    /// Languages of the restricted macro-average `avg7`.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set, default_value = "eng,spa,fra,ita,por,rus,tur")]
    pub avg7_langs: Vec<String>,
    /// Restrict evaluation to these languages.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub langs: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct CorrArgs {
    /// Score TSV files (repeatable); at least two providers overall.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Providers to correlate; defaults to every provider found.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub providers: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct QuantileArgs {
    /// Score TSV files (repeatable).
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Labels TSV; CannotSay items are skipped.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Provider whose scores are binned.
    #[arg(long, default_value = "detoxify")]
    pub provider: String,
    /// Number of equal-count bins.
    #[arg(long, default_value_t = 10)]
    pub n_quantiles: usize,
    /// Restrict to these languages.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub langs: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct WordlistArgs {
    /// Directory of `<lang>.txt` wordlists.
    #[arg(long)]
    pub wordlists: PathBuf,
    /// Utterance manifest TSV with transcripts.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Labels TSV.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Precision above which a token counts as precise in the summary.
    #[arg(long, default_value_t = 0.5)]
    pub precision_threshold: f64,
    /// Restrict to these languages.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub langs: Option<Vec<String>>,
}

fn lang_filter(langs: &Option<Vec<String>>) -> Option<BTreeSet<&str>> {
    langs.as_ref().map(|l| l.iter().map(String::as_str).collect())
}

fn eval_items(labels: &LabelSet, splits: Option<&HashMap<String, Subset>>, subsets: &[Subset], langs: &Option<BTreeSet<&str>>) -> Vec<EvalItem> {
    labels
        .records()
        .iter()
        .filter(|r| langs.as_ref().is_none_or(|l| l.contains(r.lang.as_str())))
        .filter_map(|r| {
            let label = r.verdict.as_binary()?;
            let subset = match splits {
                Some(s) => {
                    let subset = *s.get(&r.id)?;
                    if !subsets.contains(&subset) {
                        return None;
                    }
                    subset.as_str().to_string()
                }
                None => "all".to_string(),
            };
            Some(EvalItem {
                id: r.id.clone(),
                lang: r.lang.clone(),
                subset,
                label,
                categories: r.categories.clone(),
            })
        })
        .collect()
}

pub fn eval(ctx: &RunContext, args: EvalArgs) -> CliResult {
    let table = load_scores(&args.scores)?;
    let labels = load_labels(&args.labels)?;
    let splits = match &args.splits {
        Some(p) => Some(load_splits(p)?.into_iter().collect::<HashMap<_, _>>()),
        None => None,
    };
    let langs = lang_filter(&args.langs);
    let items = eval_items(&labels, splits.as_ref(), &args.subsets, &langs);
    if items.is_empty() {
        return Err(CliError::invalid("no labeled items to evaluate"));
    }
    let providers: Vec<ProviderScores> = provider_scores(&table)
        .into_iter()
        .map(|(provider, scores)| ProviderScores { provider, scores })
        .collect();
    let cfg = EvalConfig {
        threshold: args.threshold,
        baseline_provider: (args.baseline != "none").then(|| args.baseline.clone()),
        precision: PrecisionTarget {
            floor: args.floor,
            overrides: parse_kv_list(&args.floor_overrides, "--floor-overrides")?,
        },
        aggregates: vec![
            LanguageSubset {
                name: "avg7".into(),
                languages: Some(args.avg7_langs.iter().cloned().collect()),
            },
            LanguageSubset::avg(),
        ],
    };
    let report = evaluation::evaluate(&items, &providers, &cfg)?;
    ensure_dir(&args.out)?;
    emit_report(&report, &args.out)?;
    category_counts(&items).write(&args.out.join("category_counts.csv"))?;

    let mut inputs: Vec<&Path> = args.scores.iter().map(PathBuf::as_path).collect();
    inputs.push(&args.labels);
    if let Some(s) = &args.splits {
        inputs.push(s);
    }
    ctx.write_manifest(&args.out, "eval", None, &args, &inputs)?;
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    eprintln!("evaluated {} items into {}", items.len(), args.out.display());
    Ok(())
}

/// Toxic items per language and annotated category, `all` summing languages.
fn category_counts(items: &[EvalItem]) -> CsvText {
    let mut counts: BTreeMap<(String, ToxicityCategory), usize> = BTreeMap::new();
    for i in items.iter().filter(|i| i.label) {
        for c in &i.categories {
            *counts.entry((i.lang.clone(), *c)).or_default() += 1;
            *counts.entry(("all".into(), *c)).or_default() += 1;
        }
    }
    let mut csv = CsvText::new(&["lang", "category", "count"]);
    let (all, per_lang): (Vec<_>, Vec<_>) = counts.into_iter().partition(|((l, _), _)| l == "all");
    for ((lang, cat), n) in per_lang.into_iter().chain(all) {
        csv.row([lang, cat.to_string(), n.to_string()]);
    }
    csv
}

pub fn corr(ctx: &RunContext, args: CorrArgs) -> CliResult {
    let table = load_scores(&args.scores)?;
    let mut all = provider_scores(&table);
    if let Some(keep) = &args.providers {
        for p in keep {
            if !all.contains_key(p) {
                return Err(CliError::invalid(format!("provider `{p}` has no scores")));
            }
        }
        all.retain(|p, _| keep.contains(p));
    }
    let sets: Vec<(String, HashMap<String, f64>)> = all.into_iter().collect();
    let aligned = align_scores(&sets)?;
    let matrix = pearson_matrix(&aligned)?;
    ensure_dir(&args.out)?;
    let header: Vec<&str> = std::iter::once("provider")
        .chain(matrix.providers.iter().map(String::as_str))
        .collect();
    let mut csv = CsvText::new(&header);
    for (p, row) in matrix.providers.iter().zip(&matrix.values) {
        csv.row(std::iter::once(p.clone()).chain(row.iter().map(|v| fmt_sig6(*v))));
    }
    csv.write(&args.out.join("correlation.csv"))?;
    write_json(&args.out.join("correlation.json"), &matrix)?;
    let inputs: Vec<&Path> = args.scores.iter().map(PathBuf::as_path).collect();
    ctx.write_manifest(&args.out, "corr", None, &args, &inputs)?;
    eprintln!("correlated {} providers over {} items", matrix.providers.len(), matrix.n);
    Ok(())
}

pub fn quantiles(ctx: &RunContext, args: QuantileArgs) -> CliResult {
    let table = load_scores(&args.scores)?;
    let labels = load_labels(&args.labels)?;
    let scores = provider_scores(&table)
        .remove(&args.provider)
        .ok_or_else(|| CliError::invalid(format!("provider `{}` has no scores", args.provider)))?;
    let langs = lang_filter(&args.langs);
    let annotated: Vec<(f64, bool)> = labels
        .records()
        .iter()
        .filter(|r| langs.as_ref().is_none_or(|l| l.contains(r.lang.as_str())))
        .filter_map(|r| Some((*scores.get(&r.id)?, r.verdict.as_binary()?)))
        .collect();
    let q = quantile_report(&annotated, args.n_quantiles)?;
    ensure_dir(&args.out)?;
    write_quantiles_csv(&args.out, &q)?;
    write_json(&args.out.join("quantiles.json"), &q)?;
    let mut inputs: Vec<&Path> = args.scores.iter().map(PathBuf::as_path).collect();
    inputs.push(&args.labels);
    ctx.write_manifest(&args.out, "quantiles", None, &args, &inputs)?;
    eprintln!("binned {} items into {} quantiles", annotated.len(), q.bins.len());
    Ok(())
}

pub fn wordlist(ctx: &RunContext, args: WordlistArgs) -> CliResult {
    let lists = wordlist::load_wordlist_dir(&args.wordlists)?;
    let manifest = load_manifest(&args.manifest)?;
    let labels = load_labels(&args.labels)?;
    let langs = lang_filter(&args.langs);

    let mut per_lang: BTreeMap<&str, (Vec<LexicalDetection>, HashMap<String, mutox::corpus::Verdict>)> = BTreeMap::new();
    for u in &manifest.utterances {
        if langs.as_ref().is_some_and(|l| !l.contains(u.lang.as_str())) {
            continue;
        }
        let (Some(list), Some(label)) = (lists.get(&u.lang), labels.get(&u.id)) else {
            continue;
        };
        let entry = per_lang.entry(u.lang.as_str()).or_default();
        entry.1.insert(u.id.clone(), label.verdict);
        if let Some(text) = &u.transcript {
            entry.0.push(wordlist::detect(u.id.clone(), text, list));
        }
    }

    let mut tokens = CsvText::new(&[
        "lang",
        "token",
        "output_count",
        "true_positive_count",
        "precision",
        "toxic_items",
        "recall_share",
    ]);
    let mut summary = CsvText::new(&[
        "lang",
        "tokens",
        "tokens_fired",
        "precise_tokens",
        "total_toxic_items",
        "raw_recall_share",
        "dedup_recall_share",
    ]);
    for (lang, (dets, verdicts)) in &per_lang {
        let report = wordlist::token_report(dets, verdicts)?;
        for t in &report.tokens {
            tokens.row([
                lang.to_string(),
                t.token.clone(),
                t.output_count.to_string(),
                t.true_positive_count.to_string(),
                t.precision.map_or(String::new(), fmt_sig6),
                t.toxic_items.to_string(),
                fmt_sig6(t.recall_share),
            ]);
        }
        summary.row([
            lang.to_string(),
            lists[*lang].len().to_string(),
            report.tokens.len().to_string(),
            report.count_precision_above(args.precision_threshold).to_string(),
            report.total_toxic_items.to_string(),
            fmt_sig6(report.raw_recall_share),
            fmt_sig6(report.dedup_recall_share),
        ]);
    }
    ensure_dir(&args.out)?;
    tokens.write(&args.out.join("token_report.csv"))?;
    summary.write(&args.out.join("token_summary.csv"))?;
    let inputs: Vec<&Path> = vec![&args.wordlists, &args.manifest, &args.labels];
    ctx.write_manifest(&args.out, "wordlist-analyze", None, &args, &inputs)?;
    eprintln!("analyzed wordlists for {} languages", per_lang.len());
    Ok(())
}
