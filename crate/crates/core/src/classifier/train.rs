use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamConfig, AdamState};
use super::mlp::{MlpModel, Scratch};
use super::persist::payload_checksum;
use super::{ClassifierError, MlpConfig};
use crate::corpus::Modality;
use crate::evaluation::rank_auc;
use crate::rng;

/// One embedding with its binary toxicity label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEmbedding {
    pub utterance_id: String,
    pub lang: String,
    pub modality: Modality,
    pub vector: Vec<f32>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a dev-AUC improvement before stopping.
    pub early_stop_patience: usize,
    /// `None` keeps every language.
    pub language_filter: Option<BTreeSet<String>>,
    /// `None` keeps both modalities.
    pub modality_filter: Option<BTreeSet<Modality>>,
    pub positive_weight: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            batch_size: 256,
            max_epochs: 100,
            early_stop_patience: 10,
            language_filter: None,
            modality_filter: None,
            positive_weight: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// English and Spanish training data only.
    pub fn zero_shot() -> Self {
        Self {
            language_filter: Some(["eng", "spa"].into_iter().map(String::from).collect()),
            ..Self::default()
        }
    }

    /// All available training data.
    pub fn supervised() -> Self {
        Self::default()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidTrainConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(b > 0.0 && b < 1.0) {
                return bad("Adam betas must lie in (0, 1)");
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.positive_weight >= 1.0 && self.positive_weight.is_finite()) {
            return bad("positive_weight must be >= 1");
        }
        Ok(())
    }

    fn keeps(&self, e: &LabeledEmbedding) -> bool {
        self.language_filter.as_ref().is_none_or(|l| l.contains(&e.lang))
            && self.modality_filter.as_ref().is_none_or(|m| m.contains(&e.modality))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    pub best_epoch: Option<usize>,
    pub best_dev_auc: Option<f64>,
    /// FNV-1a 64 of the returned parameters as little-endian `f32`.
    pub param_checksum: u64,
}

/// Training run summary stored in model metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDescriptor {
    pub train_config: TrainConfig,
    pub n_train: usize,
    pub n_dev: usize,
    pub stopped_epoch: usize,
    pub best_epoch: Option<usize>,
    pub best_dev_auc: Option<f64>,
}

/// Trains a classifier head with mini-batch Adam on BCE-with-logits.
///
/// Each epoch shuffles the filtered training set with a SplitMix64 stream
/// seeded from `train_config.seed`. After every epoch the dev AUC is
/// measured; the returned model holds the parameters of the best dev-AUC
/// epoch.
pub fn train(
    train_set: &[LabeledEmbedding],
    dev_set: &[LabeledEmbedding],
    mlp_config: &MlpConfig,
    train_config: &TrainConfig,
) -> Result<(MlpModel<f32>, TrainReport), ClassifierError> {
    mlp_config.validate()?;
    train_config.validate()?;
    let train: Vec<&LabeledEmbedding> = train_set.iter().filter(|e| train_config.keeps(e)).collect();
    let dev: Vec<&LabeledEmbedding> = dev_set.iter().filter(|e| train_config.keeps(e)).collect();
    if train.is_empty() {
        return Err(ClassifierError::EmptySet("train"));
    }
    if dev.is_empty() {
        return Err(ClassifierError::EmptySet("dev"));
    }
    if dev.iter().all(|e| e.label) || dev.iter().all(|e| !e.label) {
        return Err(ClassifierError::SingleClassDev);
    }
    for e in train.iter().chain(&dev) {
        if e.vector.len() != mlp_config.input_dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: mlp_config.input_dim,
                found: e.vector.len(),
                id: Some(e.utterance_id.clone()),
            });
        }
        if let Some(index) = e.vector.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput { index });
        }
    }

    let mut model = MlpModel::<f32>::init(mlp_config.clone())?;
    let adam = train_config.adam();
    let positive_weight = train_config.positive_weight as f32;
    let mut state = AdamState::new(model.params().len());
    let mut grad = vec![0.0f32; model.params().len()];
    let mut scratch = Scratch::new(model.layers());
    let mut rng = rng::seeded(train_config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let dev_labels: Vec<bool> = dev.iter().map(|e| e.label).collect();

    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, Vec<f32>)> = None;
    let mut since_best = 0;
    let mut step = 0u64;
    let mut inputs: Vec<&[f32]> = Vec::with_capacity(train_config.batch_size);
    let mut labels: Vec<bool> = Vec::with_capacity(train_config.batch_size);

    for epoch in 1..=train_config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(train_config.batch_size) {
            inputs.clear();
            labels.clear();
            for &i in batch {
                inputs.push(&train[i].vector);
                labels.push(train[i].label);
            }
            let loss = model.accumulate(&inputs, &labels, positive_weight, &mut grad, &mut scratch);
            loss_sum += f64::from(loss) * batch.len() as f64;
            step += 1;
            adam_update(&mut state, model.params_mut(), &grad, step, &adam)?;
        }
        let dev_scores: Vec<f64> = dev
            .iter()
            .map(|e| model.forward_logit(&e.vector).map(f64::from))
            .collect::<Result<_, _>>()?;
        let dev_auc = rank_auc(&dev_scores, &dev_labels).map_err(|_| ClassifierError::SingleClassDev)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            dev_auc,
        });
        if best.as_ref().is_none_or(|(_, auc, _)| dev_auc > *auc) {
            best = Some((epoch, dev_auc, model.params().to_vec()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train_config.early_stop_patience {
                break;
            }
        }
    }

    let stopped_epoch = epochs.len();
    let (best_epoch, best_dev_auc) = match best {
        Some((epoch, auc, params)) => {
            model.params_mut().copy_from_slice(&params);
            (Some(epoch), Some(auc))
        }
        None => (None, None),
    };
    model.metadata.training = Some(TrainingDescriptor {
        train_config: train_config.clone(),
        n_train: train.len(),
        n_dev: dev.len(),
        stopped_epoch,
        best_epoch,
        best_dev_auc,
    });
    let report = TrainReport {
        epochs,
        stopped_epoch,
        best_epoch,
        best_dev_auc,
        param_checksum: payload_checksum(model.params()),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set(n: usize, offset: usize) -> Vec<LabeledEmbedding> {
        (0..n)
            .map(|i| {
                let label = i % 2 == 0;
                let x = (i + offset) as f32 * 0.01;
                LabeledEmbedding {
                    utterance_id: format!("u{}", i + offset),
                    lang: if i % 3 == 0 { "eng".into() } else { "deu".into() },
                    modality: if i % 5 == 0 { Modality::Text } else { Modality::Speech },
                    vector: vec![if label { 1.0 } else { -1.0 } + x.sin() * 0.2, x.cos()],
                    label,
                }
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            max_epochs: 5,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialised_model() {
        let cfg = MlpConfig::new(2, [4], 9);
        let (model, report) = train(&toy_set(20, 0), &toy_set(10, 100), &cfg, &TrainConfig {
            max_epochs: 0,
            ..quick()
        })
        .unwrap();
        assert_eq!(model.params(), MlpModel::<f32>::init(cfg).unwrap().params());
        assert!(report.epochs.is_empty());
        assert_eq!(report.stopped_epoch, 0);
        assert_eq!(report.best_dev_auc, None);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = MlpConfig::new(2, [4], 9);
        let a = train(&toy_set(40, 0), &toy_set(10, 100), &cfg, &quick()).unwrap();
        let b = train(&toy_set(40, 0), &toy_set(10, 100), &cfg, &quick()).unwrap();
        assert_eq!(a.1.param_checksum, b.1.param_checksum);
        assert_eq!(a.0.params(), b.0.params());
        let c = train(&toy_set(40, 0), &toy_set(10, 100), &cfg, &TrainConfig { seed: 1, ..quick() }).unwrap();
        assert_ne!(a.1.param_checksum, c.1.param_checksum);
    }

    #[test]
    fn filters_and_errors() {
        let cfg = MlpConfig::new(2, [4], 9);
        let only_fra = TrainConfig {
            language_filter: Some(BTreeSet::from(["fra".to_string()])),
            ..quick()
        };
        assert!(matches!(
            train(&toy_set(20, 0), &toy_set(10, 100), &cfg, &only_fra),
            Err(ClassifierError::EmptySet("train"))
        ));
        let mut dev = toy_set(10, 100);
        dev.iter_mut().for_each(|e| e.label = true);
        assert!(matches!(
            train(&toy_set(20, 0), &dev, &cfg, &quick()),
            Err(ClassifierError::SingleClassDev)
        ));
        let text_only = TrainConfig {
            modality_filter: Some(BTreeSet::from([Modality::Text])),
            ..quick()
        };
        let (model, _) = train(&toy_set(40, 0), &toy_set(40, 100), &cfg, &text_only).unwrap();
        assert_eq!(model.metadata.training.as_ref().unwrap().n_train, 8);
    }

    #[test]
    fn zero_shot_preset_keeps_eng_and_spa() {
        let cfg = TrainConfig::zero_shot();
        let filter = cfg.language_filter.as_ref().unwrap();
        assert_eq!(filter.iter().collect::<Vec<_>>(), vec!["eng", "spa"]);
        assert!(TrainConfig::supervised().language_filter.is_none());
        assert_eq!(cfg.learning_rate, 0.001);
    }

    #[test]
    fn invalid_train_config() {
        for bad in [
            TrainConfig { learning_rate: 0.0, ..quick() },
            TrainConfig { adam_beta1: 1.0, ..quick() },
            TrainConfig { batch_size: 0, ..quick() },
            TrainConfig { positive_weight: 0.5, ..quick() },
        ] {
            assert!(matches!(bad.validate(), Err(ClassifierError::InvalidTrainConfig(_))));
        }
    }

    #[test]
    fn dimension_mismatch_names_utterance() {
        let cfg = MlpConfig::new(3, [4], 9);
        let err = train(&toy_set(4, 0), &toy_set(4, 100), &cfg, &quick()).unwrap_err();
        assert!(matches!(err, ClassifierError::DimensionMismatch { id: Some(_), .. }));
    }

    #[test]
    fn tiny_learning_rate_barely_moves_parameters() {
        let cfg = MlpConfig::new(2, [4], 9);
        let tc = TrainConfig {
            learning_rate: 1e-30,
            max_epochs: 2,
            ..quick()
        };
        let (model, report) = train(&toy_set(16, 0), &toy_set(10, 100), &cfg, &tc).unwrap();
        assert!(report.epochs.iter().all(|e| e.train_loss.is_finite()));
        let init = MlpModel::<f32>::init(cfg).unwrap();
        for (a, b) in model.params().iter().zip(init.params()) {
            assert!((a - b).abs() <= 1e-28, "{a} vs {b}");
        }
    }
}
