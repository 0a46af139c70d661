//! Toy encoder-decoder sequence model over the unified vocabulary.
//!
//! Pre-LN transformer with learned positional embeddings and a shared
//! token embedding for both sides. Sequences are processed one at a time;
//! batches accumulate gradients. The encoder masks `<pad>` key positions,
//! the decoder is causally masked and cross-attends to the encoder output.

mod model;
pub mod tasks;
mod train;

pub use model::{DecodeConfig, SeqModel, SeqModelConfig};
pub use train::{train_lm, LmTrainConfig, LmTrainReport, TrainStage};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("input length {got} exceeds the maximum of {max}")]
    InputTooLong { got: usize, max: usize },
    #[error("model dim {dim} not divisible by {heads} heads")]
    BadHeads { dim: usize, heads: usize },
    #[error("max input length {0} exceeds the 512 cap")]
    MaxLenTooLarge(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty target sequence")]
    EmptyTarget,
    #[error("target does not end with the end-of-sequence token")]
    MissingEos,
    #[error("token id {id} out of vocabulary range {size}")]
    TokenOutOfRange { id: u32, size: usize },
    #[error("training diverged (non-finite loss) at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

/// The five task families the model trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    /// Part texts -> part motion tokens (modality alignment).
    TextToMotion,
    /// Part motion tokens -> part texts (modality alignment).
    MotionToText,
    /// Global text -> part texts (instructed reasoning).
    GlobalToParts,
    /// Content + style part texts -> unified part texts.
    Compose,
    /// Unified part texts -> part motion tokens (instructed generation).
    PartsToMotion,
}

pub const ALL_TASK_KINDS: [TaskKind; 5] = [
    TaskKind::TextToMotion,
    TaskKind::MotionToText,
    TaskKind::GlobalToParts,
    TaskKind::Compose,
    TaskKind::PartsToMotion,
];

/// One supervised example: encoder input ids and decoder target ids.
/// Targets always end with `<eos>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingTask {
    pub kind: TaskKind,
    pub input: Vec<u32>,
    pub target: Vec<u32>,
}

impl TrainingTask {
    pub fn new(kind: TaskKind, input: Vec<u32>, target: Vec<u32>) -> Result<Self, LmError> {
        if target.is_empty() {
            return Err(LmError::EmptyTarget);
        }
        if *target.last().unwrap() != crate::vocab::EOS {
            return Err(LmError::MissingEos);
        }
        Ok(TrainingTask {
            kind,
            input,
            target,
        })
    }
}
