//! `mutox`: selection, splitting, training, scoring, evaluation, wordlist
//! analysis, annotation serving and plot-data export.

mod commands;
mod common;
mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::common::{CliError, RunContext};
use crate::commands::{annotate, eval, model, report, select};

#[derive(Debug, Parser)]
#[command(name = "mutox", version, about = "Multilingual toxicity detection pipeline")]
struct Cli {
    /// Worker threads for per-language work; defaults to the number of logical cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// File of `key = value` lines (optionally under `[subcommand]` tables) supplying flag defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Screen by duration and sample toxic and clean candidates from classifier scores.
    SelectPrimary(select::PrimaryArgs),
    /// Three-stage wordlist and classifier selection per language.
    SelectHp(select::HpArgs),
    /// Stratified train/dev/devtest/test split.
    Split(select::SplitArgs),
    /// Train the classifier head on labeled embeddings.
    Train(model::TrainArgs),
    /// Score embeddings with a trained model.
    Score(model::ScoreArgs),
    /// AUC, precision/recall, recall at fixed precision and category tables.
    Eval(eval::EvalArgs),
    /// Pearson correlation between providers.
    Corr(eval::CorrArgs),
    /// Per-token output and precision of wordlist detections.
    WordlistAnalyze(eval::WordlistArgs),
    /// Toxic fraction per score quantile.
    Quantiles(eval::QuantileArgs),
    /// Serve an annotation campaign over HTTP.
    AnnotateServe(annotate::ServeArgs),
    /// Collect plot-ready CSVs from earlier outputs.
    Report(report::ReportArgs),
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = config::inject(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    Ok(())
                }
                _ => Err(CliError::Invalid(e.render().to_string().trim_end().to_string())),
            };
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::invalid("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::invalid(format!("--jobs: {e}")))?;
    }
    let ctx = RunContext {
        config_file: cli.config.clone(),
    };
    match cli.command {
        Command::SelectPrimary(a) => select::primary(&ctx, a),
        Command::SelectHp(a) => select::hp(&ctx, a),
        Command::Split(a) => select::split(&ctx, a),
        Command::Train(a) => model::train(&ctx, a),
        Command::Score(a) => model::score(&ctx, a),
        Command::Eval(a) => eval::eval(&ctx, a),
        Command::Corr(a) => eval::corr(&ctx, a),
        Command::WordlistAnalyze(a) => eval::wordlist(&ctx, a),
        Command::Quantiles(a) => eval::quantiles(&ctx, a),
        Command::AnnotateServe(a) => annotate::serve(&ctx, a),
        Command::Report(a) => report::report(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
