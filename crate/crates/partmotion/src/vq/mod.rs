//! Part-specific VQ-VAEs: encode, quantize, decode, and the motion <->
//! token conversions used by the sequence model.
//!
//! Each body part gets its own encoder/decoder pair and codebook. The
//! encoder downsamples time by `r` via two stride-2 convolutions; the
//! decoder mirrors it with nearest-neighbor upsampling. Inputs are
//! z-normalized per feature with statistics frozen at training time.

mod model;
mod train;

pub use model::{Codebook, Latents, PartVqModel, VqConfig};
pub use train::{train_vq, VqTrainConfig, VqTrainReport};

use crate::motion::{self, MotionSequence, PartId, ALL_PARTS};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum VqError {
    #[error("part {part:?}: stream width {got} != {expected}")]
    WidthMismatch {
        part: PartId,
        got: usize,
        expected: usize,
    },
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("latent dim {got} != codebook dim {expected}")]
    DimMismatch { got: usize, expected: usize },
    #[error("token index {index} out of range for codebook of {size}")]
    TokenOutOfRange { index: usize, size: usize },
    #[error("token sequences must have equal length: {0:?}")]
    LengthMismatch(Vec<usize>),
    #[error("all six models must share one downsample rate, got {0:?}")]
    MixedDownsample(Vec<usize>),
    #[error("training diverged (non-finite loss) at step {step}")]
    Diverged { step: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
}

/// Discrete token sequence for one body part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartTokenSeq {
    pub part: PartId,
    pub indices: Vec<usize>,
    /// Frame count of the motion the tokens came from (for exact cropping).
    pub source_len: usize,
}

/// The six trained models, one per part.
pub struct PartVqSet {
    models: [PartVqModel; 6],
}

impl PartVqSet {
    pub fn new(mut models: Vec<PartVqModel>) -> Result<Self, VqError> {
        let rates: Vec<usize> = models.iter().map(|m| m.config().downsample).collect();
        if rates.iter().any(|&r| r != rates[0]) {
            return Err(VqError::MixedDownsample(rates));
        }
        models.sort_by_key(|m| m.part().index());
        let arr: [PartVqModel; 6] = models
            .try_into()
            .map_err(|v: Vec<PartVqModel>| VqError::LengthMismatch(vec![v.len()]))?;
        Ok(PartVqSet { models: arr })
    }

    pub fn model(&self, part: PartId) -> &PartVqModel {
        &self.models[part.index()]
    }

    pub fn downsample(&self) -> usize {
        self.models[0].config().downsample
    }

    pub fn codebook_size(&self, part: PartId) -> usize {
        self.model(part).config().codebook_size
    }

    /// Motion -> six synchronized token sequences.
    pub fn tokenize(&self, m: &MotionSequence) -> Result<Vec<PartTokenSeq>, VqError> {
        let parts = motion::partition(m);
        let mut out = Vec::with_capacity(6);
        for part in ALL_PARTS {
            let model = self.model(part);
            let latents = model.encode(parts.stream(part), m.num_frames())?;
            let (indices, _) = quantize(&model.codebook(), &latents)?;
            out.push(PartTokenSeq {
                part,
                indices,
                source_len: m.num_frames(),
            });
        }
        Ok(out)
    }

    /// Six token sequences -> motion. Sequences must be aligned in length.
    pub fn detokenize(&self, seqs: &[PartTokenSeq]) -> Result<MotionSequence, VqError> {
        let lens: Vec<usize> = seqs.iter().map(|s| s.indices.len()).collect();
        if seqs.len() != 6 || lens.iter().any(|&l| l != lens[0]) || lens[0] == 0 {
            return Err(VqError::LengthMismatch(lens));
        }
        let src_lens: Vec<usize> = seqs.iter().map(|s| s.source_len).collect();
        if src_lens.iter().any(|&l| l != src_lens[0]) {
            return Err(VqError::LengthMismatch(src_lens));
        }
        let mut streams = Vec::with_capacity(6);
        for seq in seqs {
            let model = self.model(seq.part);
            let stream = model.decode(&seq.indices, Some(seq.source_len))?;
            streams.push((seq.part, stream));
        }
        let set = motion::BodyPartSet::from_streams(src_lens[0], streams)?;
        Ok(motion::merge(&set)?)
    }
}

/// Nearest-code lookup: each latent row maps to the index of the closest
/// codebook entry by Euclidean distance; ties break to the lowest index.
/// Distances accumulate in f64 so the argmin is stable.
pub fn quantize(cb: &Codebook, latents: &Latents) -> Result<(Vec<usize>, Vec<f32>), VqError> {
    if cb.entries == 0 {
        return Err(VqError::EmptyCodebook);
    }
    if latents.dim != cb.dim {
        return Err(VqError::DimMismatch {
            got: latents.dim,
            expected: cb.dim,
        });
    }
    let d = cb.dim;
    let mut indices = Vec::with_capacity(latents.len);
    let mut quantized = Vec::with_capacity(latents.len * d);
    for row in 0..latents.len {
        let lat = &latents.data[row * d..(row + 1) * d];
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for k in 0..cb.entries {
            let code = cb.vector(k);
            let mut dist = 0.0f64;
            for (&a, &b) in lat.iter().zip(code) {
                let diff = a as f64 - b as f64;
                dist += diff * diff;
            }
            if dist < best_dist {
                best_dist = dist;
                best = k;
            }
        }
        indices.push(best);
        quantized.extend_from_slice(cb.vector(best));
    }
    Ok((indices, quantized))
}

/// The training objective, split into its three terms. Every term is a
/// per-element mean of squared differences; `total = recon + codebook +
/// beta * commit`. Stop-gradient routing happens in the training graph;
/// this function only evaluates the values (the codebook and commitment
/// terms share them).
pub fn vq_loss(
    x: &[f32],
    x_hat: &[f32],
    latents: &[f32],
    codes: &[f32],
    beta: f32,
) -> (f32, f32, f32, f32) {
    let recon = mean_sq_diff(x, x_hat);
    let codebook = mean_sq_diff(latents, codes);
    let commit = codebook;
    let total = recon + codebook + beta * commit;
    (total, recon, codebook, commit)
}

fn mean_sq_diff(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    (sum / a.len() as f64) as f32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn codebook(entries: usize, dim: usize, data: Vec<f32>) -> Codebook {
        Codebook {
            part: PartId::Root,
            entries,
            dim,
            data,
        }
    }

    fn latents(len: usize, dim: usize, data: Vec<f32>) -> Latents {
        Latents { len, dim, data }
    }

    #[test]
    fn latent_equal_to_code_maps_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f32> = (0..16 * 4).map(|_| rng.gen::<f32>()).collect();
        let cb = codebook(16, 4, data.clone());
        let lat = latents(1, 4, data[7 * 4..8 * 4].to_vec());
        let (idx, q) = quantize(&cb, &lat).unwrap();
        assert_eq!(idx, vec![7]);
        assert_eq!(q, &data[7 * 4..8 * 4]);
    }

    #[test]
    fn nearer_code_wins() {
        let cb = codebook(2, 1, vec![0.0, 10.0]);
        let lat = latents(1, 1, vec![4.0]);
        let (idx, _) = quantize(&cb, &lat).unwrap();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let cb = codebook(3, 2, vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0]);
        let lat = latents(1, 2, vec![1.0, 1.0]);
        let (idx, _) = quantize(&cb, &lat).unwrap();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn matches_exhaustive_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = 512;
        let d = 8;
        let cb_data: Vec<f32> = (0..k * d).map(|_| rng.gen::<f32>()).collect();
        let cb = codebook(k, d, cb_data.clone());
        let lat_data: Vec<f32> = (0..32 * d).map(|_| rng.gen::<f32>()).collect();
        let lat = latents(32, d, lat_data.clone());
        let (idx, _) = quantize(&cb, &lat).unwrap();
        // Independent exhaustive scan in f64.
        for row in 0..32 {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for kk in 0..k {
                let dist: f64 = (0..d)
                    .map(|j| {
                        let diff = lat_data[row * d + j] as f64 - cb_data[kk * d + j] as f64;
                        diff * diff
                    })
                    .sum();
                if dist < best_dist {
                    best_dist = dist;
                    best = kk;
                }
            }
            assert_eq!(idx[row], best, "row {row}");
        }
    }

    #[test]
    fn empty_codebook_is_an_error() {
        let cb = codebook(0, 2, vec![]);
        let lat = latents(1, 2, vec![0.0, 0.0]);
        assert!(matches!(quantize(&cb, &lat), Err(VqError::EmptyCodebook)));
    }

    #[test]
    fn loss_zero_on_perfect_reconstruction() {
        let x = vec![1.0f32, 2.0, 3.0];
        let lat = vec![0.5f32, 0.5];
        let (total, recon, code, commit) = vq_loss(&x, &x, &lat, &lat, 0.25);
        assert_eq!((total, recon, code, commit), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn beta_zero_drops_commit_term() {
        let x = vec![1.0f32, 2.0];
        let xh = vec![1.5f32, 2.5];
        let lat = vec![0.0f32, 0.0];
        let codes = vec![1.0f32, 1.0];
        let (total, recon, code, _) = vq_loss(&x, &xh, &lat, &codes, 0.0);
        assert!((total - (recon + code)).abs() < 1e-7);
    }

    #[test]
    fn loss_matches_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f32> = (0..12).map(|_| rng.gen::<f32>()).collect();
        let xh: Vec<f32> = (0..12).map(|_| rng.gen::<f32>()).collect();
        let lat: Vec<f32> = (0..6).map(|_| rng.gen::<f32>()).collect();
        let codes: Vec<f32> = (0..6).map(|_| rng.gen::<f32>()).collect();
        let beta = 0.25;
        let (total, recon, code, commit) = vq_loss(&x, &xh, &lat, &codes, beta);
        // Direct formula oracle in f64.
        let msd = |a: &[f32], b: &[f32]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(&p, &q)| (p as f64 - q as f64).powi(2))
                .sum::<f64>()
                / a.len() as f64
        };
        let want_recon = msd(&x, &xh);
        let want_code = msd(&lat, &codes);
        let want_total = want_recon + want_code + beta as f64 * want_code;
        assert!((recon as f64 - want_recon).abs() < 1e-6);
        assert!((code as f64 - want_code).abs() < 1e-6);
        assert!((commit as f64 - want_code).abs() < 1e-6);
        assert!((total as f64 - want_total).abs() < 1e-6);
    }
}
