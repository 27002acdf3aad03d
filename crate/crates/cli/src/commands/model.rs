use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use clap::Args;
use mutox::classifier::{self, LabeledEmbedding, MlpConfig, TrainConfig};
use mutox::corpus::{self, EmbeddingRecord, Modality};
use mutox::rng::derive_seed;
use mutox::selection::{load_splits, Subset};
use serde::Serialize;

use crate::common::{ensure_dir, load_labels, load_manifest, write_json, CliError, CliResult, RunContext};

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Utterance manifest TSV (languages and modalities).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Labels TSV; CannotSay items are skipped.
    #[arg(long)]
    pub labels: PathBuf,
    /// Splits TSV from `mutox split`.
    #[arg(long)]
    pub splits: PathBuf,
    /// Embedding files in MTXE format (repeatable).
    #[arg(long, required = true)]
    pub embeddings: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline seed.
    #[arg(long)]
    pub seed: u64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set, default_value = "512,128")]
    pub hidden_dims: Vec<usize>,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    /// Mini-batch size.
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// Upper bound on training epochs.
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    /// Epochs without dev-AUC improvement before stopping.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Weight on the positive-class loss term.
    #[arg(long, default_value_t = 1.0)]
    pub positive_weight: f64,
    /// Train on English and Spanish only.
    #[arg(long)]
    pub zero_shot: bool,
    /// Restrict training and dev data to these languages.
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub langs: Option<Vec<String>>,
    /// Restrict training and dev data to these modalities (speech, text).
    #[arg(long, value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Set)]
    pub modalities: Option<Vec<Modality>>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ScoreArgs {
    /// Model file in MTXM format.
    #[arg(long)]
    pub model: PathBuf,
    /// Embedding files in MTXE format (repeatable).
    #[arg(long, required = true)]
    pub embeddings: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Provider name written to the scores; defaults to the model's name.
    #[arg(long)]
    pub provider: Option<String>,
}

fn load_all_embeddings(paths: &[PathBuf]) -> CliResult<Vec<EmbeddingRecord>> {
    let mut out = Vec::new();
    let mut dim = None;
    for p in paths {
        let records = corpus::load_embeddings(p, dim)?;
        if let Some(first) = records.first() {
            dim.get_or_insert(first.vector.len());
        }
        out.extend(records);
    }
    Ok(out)
}

pub fn train(ctx: &RunContext, args: TrainArgs) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let labels = load_labels(&args.labels)?;
    let splits: HashMap<String, Subset> = load_splits(&args.splits)?.into_iter().collect();
    let embeddings = load_all_embeddings(&args.embeddings)?;
    let input_dim = embeddings
        .first()
        .map(|e| e.vector.len())
        .ok_or_else(|| CliError::invalid("no embeddings loaded"))?;
    let utt: HashMap<&str, &corpus::Utterance> = manifest.utterances.iter().map(|u| (u.id.as_str(), u)).collect();

    let mut train_set = Vec::new();
    let mut dev_set = Vec::new();
    for e in embeddings {
        let (Some(u), Some(label), Some(subset)) = (
            utt.get(e.utterance_id.as_str()),
            labels.get(&e.utterance_id),
            splits.get(&e.utterance_id),
        ) else {
            continue;
        };
        let Some(label) = label.verdict.as_binary() else {
            continue;
        };
        let item = LabeledEmbedding {
            utterance_id: e.utterance_id,
            lang: u.lang.clone(),
            modality: e.modality.unwrap_or(u.modality),
            vector: e.vector,
            label,
        };
        match subset {
            Subset::Train => train_set.push(item),
            Subset::Dev => dev_set.push(item),
            _ => {}
        }
    }

    let base = if args.zero_shot {
        TrainConfig::zero_shot()
    } else {
        TrainConfig::supervised()
    };
    let language_filter = match &args.langs {
        Some(l) => Some(l.iter().cloned().collect::<BTreeSet<_>>()),
        None => base.language_filter.clone(),
    };
    let train_cfg = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        early_stop_patience: args.patience,
        positive_weight: args.positive_weight,
        language_filter,
        modality_filter: args.modalities.as_ref().map(|m| m.iter().copied().collect()),
        seed: derive_seed(args.seed, "train.shuffle"),
        ..base
    };
    let mlp_cfg = MlpConfig::new(input_dim, args.hidden_dims.clone(), derive_seed(args.seed, "train.init"));
    let (model, report) = classifier::train(&train_set, &dev_set, &mlp_cfg, &train_cfg)?;

    ensure_dir(&args.out)?;
    classifier::persist_model(&model, args.out.join("model.mtxm"))?;
    write_json(&args.out.join("train_report.json"), &report)?;
    let inputs: Vec<&Path> = [args.manifest.as_path(), args.labels.as_path(), args.splits.as_path()]
        .into_iter()
        .chain(args.embeddings.iter().map(PathBuf::as_path))
        .collect();
    ctx.write_manifest(&args.out, "train", Some(args.seed), &args, &inputs)?;
    eprintln!(
        "trained on {} items for {} epochs, best dev AUC {}",
        train_set.len(),
        report.stopped_epoch,
        report.best_dev_auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
    );
    Ok(())
}

pub fn score(ctx: &RunContext, args: ScoreArgs) -> CliResult {
    let model = classifier::load_model(&args.model)?;
    let embeddings = load_all_embeddings(&args.embeddings)?;
    let mut records = classifier::score_batch(&model, &embeddings)?;
    if let Some(p) = &args.provider {
        for r in &mut records {
            r.provider = p.clone();
        }
    }
    ensure_dir(&args.out)?;
    corpus::save_scores(args.out.join("scores.tsv"), &records)?;
    let inputs: Vec<&Path> = std::iter::once(args.model.as_path())
        .chain(args.embeddings.iter().map(PathBuf::as_path))
        .collect();
    ctx.write_manifest(&args.out, "score", None, &args, &inputs)?;
    eprintln!("scored {} embeddings into {}", records.len(), args.out.display());
    Ok(())
}
