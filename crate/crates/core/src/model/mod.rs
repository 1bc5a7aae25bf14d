//! Transformer encoder with graph-guided attention and a three-way sigmoid
//! head, written against `ndarray` and generic over the float type.

mod forward;
mod gradcheck;
mod io;
mod params;
mod predict;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentError;
use crate::encode::{EncodeError, EncodeOptions, VocabFile, Vocabulary};
use crate::syntax::SyntaxError;

pub use forward::{
    backward, compute_loss, forward, forward_with_mask, loss_grad, mask_matrix, masked_softmax,
    masked_value, sample_gradient, sigmoid, ForwardCache, ForwardOutput, SampleGrads, PROB_CLAMP,
};
pub use gradcheck::{check_gradients, probe_input, relative_error, GradCheckReport, GroupCheck, FD_STEP, MIN_COORDS};
pub use io::{load_model, read_model, save_model, write_model, MAGIC};
pub use params::{AttentionScale, Body, Layer, ModelConfig, ModelParams, LAYER_TENSORS};
pub use predict::{predict_sample, predict_source, LoopPrediction, Prediction, THRESHOLD};
pub use train::{evaluate_inputs, train, Adam, EpochRecord, TrainOptions, Trainer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: u32, step: usize, loss: f64 },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("parse error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad model file: {0}")]
    Format(String),
}

/// Encoding settings a model was trained with (`encode.json`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeMeta {
    pub max_code: usize,
    pub max_dfg: usize,
    pub with_scope: bool,
}

impl EncodeMeta {
    pub fn options(&self) -> EncodeOptions {
        EncodeOptions {
            max_code: self.max_code,
            max_dfg: self.max_dfg,
        }
    }
}

/// A trained model directory: `model.bin`, `vocab.json`, `encode.json`.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    pub vocab: Vocabulary,
    pub encode: EncodeMeta,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ModelError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ModelError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ModelError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ModelBundle {
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir).map_err(|source| ModelError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        save_model(&dir.join("model.bin"), &self.config, &self.params)?;
        write_json(&dir.join("vocab.json"), &self.vocab.to_json())?;
        write_json(&dir.join("encode.json"), &self.encode)
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let (config, params) = load_model(&dir.join("model.bin"))?;
        let vocab_file: VocabFile = read_json(&dir.join("vocab.json"))?;
        let vocab = Vocabulary::from_json(vocab_file)?;
        let encode: EncodeMeta = read_json(&dir.join("encode.json"))?;
        if vocab.len() != config.vocab_size {
            return Err(ModelError::Config(format!(
                "vocab.json has {} tokens, model expects {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        Ok(ModelBundle {
            config,
            params,
            vocab,
            encode,
        })
    }
}
