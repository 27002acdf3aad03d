use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use mutox::evaluation::{fmt_sig6, read_report, QuantileReport};
use serde::Serialize;

use crate::common::{ensure_dir, CliError, CliResult, CsvText, RunContext};

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// Output directory of `mutox eval`.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Output directory of `mutox select-hp` or `mutox select-primary`.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Output directory of `mutox quantiles`.
    #[arg(long)]
    pub quantiles: Option<PathBuf>,
    /// Output directory of `mutox wordlist-analyze`.
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolves `file` inside the directory given for `flag`, naming the
/// subcommand that produces it when either is missing.
fn upstream(dir: &Option<PathBuf>, flag: &str, subcommand: &str, file: &str) -> CliResult<PathBuf> {
    let dir = dir.as_ref().ok_or_else(|| {
        CliError::invalid(format!(
            "missing {flag} input: pass --{flag} with the output directory of `mutox {subcommand}`"
        ))
    })?;
    let path = dir.join(file);
    if !path.is_file() {
        return Err(CliError::Io(format!(
            "{}: not found; run `mutox {subcommand}` first",
            path.display()
        )));
    }
    Ok(path)
}

fn read_csv(path: &Path, header: &[&str]) -> CliResult<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let found = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::invalid(format!(
            "{}: header mismatch, expected `{}`",
            path.display(),
            header.join(",")
        )));
    }
    reader
        .records()
        .map(|r| r.map_err(|e| CliError::invalid(format!("{}: {e}", path.display()))))
        .collect()
}

fn parse_count(path: &Path, value: &str) -> CliResult<usize> {
    value
        .parse()
        .map_err(|_| CliError::invalid(format!("{}: `{value}` is not a count", path.display())))
}

pub fn report(ctx: &RunContext, args: ReportArgs) -> CliResult {
    let counts_path = upstream(&args.eval, "eval", "eval", "category_counts.csv")?;
    let report_path = upstream(&args.eval, "eval", "eval", "report.json")?;
    let stages_path = upstream(&args.selection, "selection", "select-hp", "stage_distribution.csv")?;
    let quantiles_path = upstream(&args.quantiles, "quantiles", "quantiles", "quantiles.json")?;
    let tokens_path = upstream(&args.wordlist, "wordlist", "wordlist-analyze", "token_report.csv")?;
    ensure_dir(&args.out)?;

    let mut counts = CsvText::new(&["lang", "category", "count"]);
    for r in read_csv(&counts_path, &["lang", "category", "count"])? {
        counts.row(r.iter().map(String::from));
    }
    counts.write(&args.out.join("category_counts.csv"))?;

    let rows = read_csv(&stages_path, &["lang", "stage", "count"])?;
    let mut per_lang: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &rows {
        *per_lang.entry(&r[0]).or_default() += parse_count(&stages_path, &r[2])?;
    }
    let mut stages = CsvText::new(&["lang", "stage", "count", "fraction"]);
    for r in &rows {
        let n = parse_count(&stages_path, &r[2])?;
        let total = per_lang[&r[0]];
        let frac = if total == 0 { 0.0 } else { n as f64 / total as f64 };
        stages.row([r[0].to_string(), r[1].to_string(), n.to_string(), fmt_sig6(frac)]);
    }
    stages.write(&args.out.join("stage_distribution.csv"))?;

    let text = std::fs::read_to_string(&quantiles_path).map_err(|e| CliError::io(&quantiles_path, e))?;
    let q: QuantileReport = serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("{}: {e}", quantiles_path.display())))?;
    let mut curve = CsvText::new(&["bin", "score_min", "score_max", "n", "toxic_fraction"]);
    for b in &q.bins {
        curve.row([
            b.bin.to_string(),
            fmt_sig6(b.score_min),
            fmt_sig6(b.score_max),
            b.n.to_string(),
            fmt_sig6(b.toxic_fraction),
        ]);
    }
    curve.write(&args.out.join("quantile_curve.csv"))?;

    let report = read_report(&report_path)?;
    let mut recall = CsvText::new(&["lang", "provider", "subset", "category", "n_toxic", "hits", "recall"]);
    let mut pooled: BTreeMap<(usize, String, String, String), (usize, usize)> = BTreeMap::new();
    let provider_rank = |p: &str| report.providers.iter().position(|x| x == p).unwrap_or(usize::MAX);
    for row in &report.rows {
        let Some(b) = &row.categories else { continue };
        for c in &b.categories {
            recall.row([
                row.lang.clone(),
                row.provider.clone(),
                row.subset.clone(),
                c.category.to_string(),
                c.n_toxic.to_string(),
                c.hits.to_string(),
                fmt_sig6(c.recall),
            ]);
            let e = pooled
                .entry((provider_rank(&row.provider), row.provider.clone(), row.subset.clone(), c.category.to_string()))
                .or_default();
            e.0 += c.n_toxic;
            e.1 += c.hits;
        }
    }
    for ((_, provider, subset, category), (n, hits)) in pooled {
        let r = if n == 0 { String::new() } else { fmt_sig6(hits as f64 / n as f64) };
        recall.row(["all".to_string(), provider, subset, category, n.to_string(), hits.to_string(), r]);
    }
    recall.write(&args.out.join("category_recall.csv"))?;

    let header = [
        "lang",
        "token",
        "output_count",
        "true_positive_count",
        "precision",
        "toxic_items",
        "recall_share",
    ];
    let mut scatter = CsvText::new(&["lang", "token", "output_count", "precision"]);
    for r in read_csv(&tokens_path, &header)? {
        scatter.row([r[0].to_string(), r[1].to_string(), r[2].to_string(), r[4].to_string()]);
    }
    scatter.write(&args.out.join("token_scatter.csv"))?;

    let inputs: Vec<&Path> = vec![&counts_path, &report_path, &stages_path, &quantiles_path, &tokens_path];
    ctx.write_manifest(&args.out, "report", None, &args, &inputs)?;
    eprintln!("wrote plot data into {}", args.out.display());
    Ok(())
}
