use rayon::prelude::*;

use super::loss::sigmoid;
use super::mlp::MlpModel;
use super::ClassifierError;
use crate::corpus::{EmbeddingRecord, ScoreCategory, ScoreRecord, ScoreSide};

/// `sigmoid(logit)` in double precision, kept inside the open interval (0, 1).
pub fn score_from_logit(logit: f32) -> f64 {
    let below_one = 1.0 - f64::EPSILON / 2.0;
    sigmoid(f64::from(logit)).clamp(f64::MIN_POSITIVE, below_one)
}

/// Scores every embedding; output order follows input order.
pub fn score_batch(model: &MlpModel<f32>, embeddings: &[EmbeddingRecord]) -> Result<Vec<ScoreRecord>, ClassifierError> {
    embeddings
        .par_iter()
        .map(|e| {
            let logit = model.forward_checked(&e.vector, &e.utterance_id)?;
            Ok(ScoreRecord {
                utterance_id: e.utterance_id.clone(),
                provider: model.metadata.name.clone(),
                category: ScoreCategory::Overall,
                score: score_from_logit(logit),
                score_side: ScoreSide::Native,
            })
        })
        .collect()
}
