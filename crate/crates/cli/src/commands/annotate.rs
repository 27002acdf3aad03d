use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::Args;
use mutox::annotation::{tasks_from_manifest, Campaign, CampaignConfig};
use mutox::corpus::{self, ToxicityCategory};
use mutox::selection::load_selection;
use serde::Serialize;

use crate::common::{ensure_dir, load_manifest, write_text, CliError, CliResult, CsvText, RunContext};

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ServeArgs {
    /// Utterance manifest TSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Campaign id used in the API paths.
    #[arg(long, default_value = "default")]
    pub campaign: String,
    /// Append-only label log (JSON lines); replayed on start.
    #[arg(long)]
    pub log: PathBuf,
    /// Selection TSV restricting the campaign to its items, in its order.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    /// Directory served under `/media`.
    #[arg(long)]
    pub media: Option<PathBuf>,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Minutes an assignment stays leased to one annotator.
    #[arg(long, default_value_t = 30)]
    pub lease_minutes: i64,
    /// Distinct annotators needed per task.
    #[arg(long, default_value_t = 1)]
    pub replication: usize,
    /// Replay the log, write labels.tsv, summary.csv and export.jsonl into DIR, and exit.
    #[arg(long, value_name = "DIR")]
    pub export_to: Option<PathBuf>,
}

pub fn serve(ctx: &RunContext, args: ServeArgs) -> CliResult {
    if args.lease_minutes <= 0 {
        return Err(CliError::invalid("--lease-minutes must be positive"));
    }
    let manifest = load_manifest(&args.manifest)?;
    let ids = match &args.ids {
        Some(p) => Some(load_selection(p)?.selected.into_iter().map(|s| s.id).collect::<Vec<_>>()),
        None => None,
    };
    let tasks = tasks_from_manifest(&manifest, ids.as_deref())?;
    let cfg = CampaignConfig {
        lease: chrono::Duration::minutes(args.lease_minutes),
        replication: args.replication,
        ..CampaignConfig::default()
    };

    if let Some(dir) = &args.export_to {
        let campaign = if args.log.exists() {
            Campaign::open(args.campaign.clone(), tasks, cfg, &args.log)?
        } else {
            return Err(CliError::io(&args.log, "label log not found"));
        };
        return export(ctx, &args, &campaign, dir);
    }

    let campaign = Campaign::open(args.campaign.clone(), tasks, cfg, &args.log)?;
    let state = mutox_annotate::AppState::new([campaign]);
    let app = mutox_annotate::router(state, args.media.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(format!("tokio runtime: {e}")))?;
    eprintln!("serving campaign `{}` on http://{}", args.campaign, args.addr);
    runtime
        .block_on(mutox_annotate::serve(args.addr, app))
        .map_err(|e| CliError::Io(format!("{}: {e}", args.addr)))
}

fn export(ctx: &RunContext, args: &ServeArgs, campaign: &Campaign, dir: &Path) -> CliResult {
    ensure_dir(dir)?;
    let labels = campaign.export();
    corpus::save_labels(dir.join("labels.tsv"), &campaign.label_records())?;
    let summary = campaign.summary();
    let mut header = vec!["total", "cannot_say", "not_toxic", "toxic"];
    header.extend(ToxicityCategory::ALL.iter().map(|c| c.as_str()));
    let mut csv = CsvText::new(&header);
    csv.row(
        summary
            .table_row()
            .into_iter()
            .chain(ToxicityCategory::ALL.iter().map(|c| summary.categories.get(c).copied().unwrap_or(0)))
            .map(|n| n.to_string()),
    );
    csv.write(&dir.join("summary.csv"))?;
    let mut jsonl = String::new();
    for l in &labels {
        writeln!(jsonl, "{}", serde_json::to_string(l).expect("label serializes")).expect("write to string");
    }
    write_text(&dir.join("export.jsonl"), &jsonl)?;
    let mut inputs: Vec<&Path> = vec![&args.manifest, &args.log];
    if let Some(p) = &args.ids {
        inputs.push(p);
    }
    ctx.write_manifest(dir, "annotate-serve", None, args, &inputs)?;
    eprintln!("exported {} labels into {}", labels.len(), dir.display());
    Ok(())
}
