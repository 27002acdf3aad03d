//! Feed-forward toxicity classifier head over fixed-size embeddings.
//!
//! The network is `input_dim -> hidden_dims[0] -> ... -> 1` with ReLU on
//! every hidden layer and a single output logit. Parameters live in one flat
//! vector, layer by layer, each layer's weights row-major `[out x in]`
//! followed by its biases. That layout is shared by gradients, the Adam
//! state and the `MTXM` model file.
//!
//! Models are generic over the float type: trained and persisted models use
//! `f32`, while `f64` models are used for numerical gradient checks.

mod adam;
mod loss;
mod mlp;
mod persist;
mod score;
mod train;

use std::fmt::Debug;
use std::path::PathBuf;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, AdamConfig, AdamState};
pub use loss::{bce_grad, bce_with_logits, sigmoid, softplus};
pub use mlp::{Gradient, LayerShape, MlpModel, ModelMetadata};
pub use persist::{load_model, persist_model, read_model, write_model, MTXM_MAGIC, MTXM_VERSION};
pub use score::{score_batch, score_from_logit};
pub use train::{train, EpochRecord, LabeledEmbedding, TrainConfig, TrainReport, TrainingDescriptor};

/// Float types the network can run in.
pub trait Real: Float + FromPrimitive + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl<T: Float + FromPrimitive + Debug + Send + Sync + 'static> Real for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    /// Seeds the He-uniform initialisation.
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            input_dim: 1024,
            hidden_dims: vec![512, 128],
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_dims: impl Into<Vec<usize>>, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_dims: hidden_dims.into(),
            activation: Activation::Relu,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.input_dim == 0 {
            return Err(ClassifierError::InvalidConfig("input_dim must be positive".into()));
        }
        if self.hidden_dims.is_empty() {
            return Err(ClassifierError::InvalidConfig(
                "at least one hidden layer is required".into(),
            ));
        }
        if self.hidden_dims.contains(&0) {
            return Err(ClassifierError::InvalidConfig("hidden dims must be positive".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer, including the final one-logit layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&1)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }
}

/// `sum(out * in + out)` over all layers.
pub fn param_count(config: &MlpConfig) -> Result<usize, ClassifierError> {
    config.validate()?;
    Ok(config.layer_dims().iter().map(|&(i, o)| o * i + o).sum())
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("input dimension mismatch{}: expected {expected}, found {found}", id.as_ref().map(|i| format!(" for `{i}`")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        id: Option<String>,
    },
    #[error("non-finite input value at index {index}")]
    NonFiniteInput { index: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch has {inputs} inputs but {labels} labels")]
    BatchLength { inputs: usize, labels: usize },
    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("Adam step index must be >= 1")]
    InvalidStep,
    #[error("{0} set is empty after language/modality filtering")]
    EmptySet(&'static str),
    #[error("dev set contains a single class; AUC is undefined")]
    SingleClassDev,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {0:02X?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported model version {found} (expected {expected})")]
    UnsupportedVersion { expected: u8, found: u8 },
    #[error("malformed model header: {0}")]
    Header(String),
    #[error("parameter count mismatch: header dims imply {expected}, found {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("payload checksum mismatch: header {expected:016x}, payload {found:016x}")]
    Checksum { expected: u64, found: u64 },
    #[error("truncated model file: {0}")]
    Truncated(String),
}

impl ClassifierError {
    pub fn is_io(&self) -> bool {
        matches!(self, ClassifierError::Io { .. })
    }
}
