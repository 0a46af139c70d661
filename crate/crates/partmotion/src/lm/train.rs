//! Sequence-model training with linear warmup and per-stage defaults.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::AdamState;

use super::{LmError, SeqModel, TaskKind, TrainingTask, ALL_TASK_KINDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStage {
    /// Modality alignment: bidirectional text <-> motion translation.
    Pretrain,
    /// Instruction following: reasoning, composition, generation templates.
    Posttrain,
}

impl TrainStage {
    pub fn default_lr(self) -> f32 {
        match self {
            TrainStage::Pretrain => 2e-4,
            TrainStage::Posttrain => 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Overrides the stage default when set.
    pub lr: Option<f32>,
    pub warmup_steps: usize,
    pub seed: u64,
    /// Evaluate full-dataset NLL every this many steps.
    pub eval_interval: usize,
    /// Stop early when full-dataset per-token NLL drops below this.
    pub target_nll: Option<f32>,
}

impl Default for LmTrainConfig {
    fn default() -> Self {
        LmTrainConfig {
            steps: 3000,
            batch_size: 8,
            lr: None,
            warmup_steps: 100,
            seed: 0,
            eval_interval: 100,
            target_nll: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmTrainReport {
    /// (step, batch loss) at every step.
    pub curve: Vec<(usize, f32)>,
    /// Per-token NLL over the whole dataset at the end.
    pub final_nll: f32,
    pub steps_run: usize,
}

/// Full-parameter training over a task dataset. Post-training batches mix
/// task kinds uniformly; pre-training samples uniformly over examples.
pub fn train_lm(
    model: &mut SeqModel,
    dataset: &[TrainingTask],
    stage: TrainStage,
    cfg: &LmTrainConfig,
) -> Result<LmTrainReport, LmError> {
    if dataset.is_empty() {
        return Err(LmError::EmptyBatch);
    }
    let lr = cfg.lr.unwrap_or(stage.default_lr());
    let mut adam = AdamState::new(lr, &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut by_kind: Vec<(TaskKind, Vec<usize>)> = Vec::new();
    for kind in ALL_TASK_KINDS {
        let idx: Vec<usize> = dataset
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == kind)
            .map(|(i, _)| i)
            .collect();
        if !idx.is_empty() {
            by_kind.push((kind, idx));
        }
    }

    let mut curve = Vec::with_capacity(cfg.steps);
    let mut final_nll = f32::INFINITY;
    let mut steps_run = 0;

    for step in 0..cfg.steps {
        steps_run = step + 1;
        let warm = if cfg.warmup_steps > 0 {
            ((step + 1) as f32 / cfg.warmup_steps as f32).min(1.0)
        } else {
            1.0
        };
        adam.lr = lr * warm;

        let batch: Vec<&TrainingTask> = (0..cfg.batch_size)
            .map(|_| match stage {
                TrainStage::Posttrain => {
                    let (_, members) = &by_kind[rng.gen_range(0..by_kind.len())];
                    &dataset[members[rng.gen_range(0..members.len())]]
                }
                TrainStage::Pretrain => &dataset[rng.gen_range(0..dataset.len())],
            })
            .collect();

        model.params.zero_grads();
        let loss = model.batch_loss(&batch, true)?;
        if !loss.is_finite() {
            return Err(LmError::Diverged { step });
        }
        adam.step(&mut model.params);
        curve.push((step + 1, loss));

        if (step + 1) % cfg.eval_interval == 0 || step + 1 == cfg.steps {
            final_nll = dataset_nll(model, dataset)?;
            if let Some(target) = cfg.target_nll {
                if final_nll < target {
                    break;
                }
            }
        }
    }

    if final_nll == f32::INFINITY {
        final_nll = dataset_nll(model, dataset)?;
    }
    Ok(LmTrainReport {
        curve,
        final_nll,
        steps_run,
    })
}

/// Per-token NLL over a full dataset (no gradients).
pub fn dataset_nll(model: &mut SeqModel, dataset: &[TrainingTask]) -> Result<f32, LmError> {
    let refs: Vec<&TrainingTask> = dataset.iter().collect();
    model.batch_loss(&refs, false)
}
