//! VQ-VAE training: straight-through reconstruction plus the codebook and
//! commitment terms, with periodic dead-code reinitialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::motion::{MotionSequence, PartId};
use crate::tensor::{AdamState, Graph, Tensor};

use super::model::{corpus_normalization, part_stream_of, PartVqModel, VqConfig};
use super::{quantize, VqError};

#[derive(Debug, Clone)]
pub struct VqTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub seed: u64,
    /// Unused codes are re-seeded from batch latents every this many steps.
    pub dead_code_interval: usize,
    /// Corpus reconstruction MSE is evaluated every this many steps.
    pub eval_interval: usize,
    /// Stop early once the evaluated reconstruction MSE drops below this.
    pub target_recon_mse: Option<f32>,
}

impl Default for VqTrainConfig {
    fn default() -> Self {
        VqTrainConfig {
            steps: 2000,
            batch_size: 4,
            lr: 1e-3,
            seed: 0,
            dead_code_interval: 200,
            eval_interval: 100,
            target_recon_mse: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VqTrainReport {
    /// (step, total loss) samples along the run.
    pub curve: Vec<(usize, f32)>,
    pub final_recon_mse: f32,
    pub steps_run: usize,
    /// Distinct codes used when tokenizing the training corpus at the end.
    pub codes_used: usize,
}

/// Trains one part's VQ-VAE on a corpus of motions.
pub fn train_vq(
    corpus: &[MotionSequence],
    part: PartId,
    cfg: &VqConfig,
    tcfg: &VqTrainConfig,
) -> Result<(PartVqModel, VqTrainReport), VqError> {
    if corpus.is_empty() {
        return Err(VqError::EmptyCorpus);
    }
    let streams: Vec<(Vec<f32>, usize)> = corpus.iter().map(|m| part_stream_of(m, part)).collect();
    let mut model = PartVqModel::new(part, cfg.clone(), tcfg.seed);
    let (mean, std) = corpus_normalization(&streams, model.width());
    model.set_normalization(mean, std);

    // Pre-normalized channel-major inputs, padded to a multiple of r.
    let prepared: Vec<(Vec<f32>, usize)> = streams
        .iter()
        .map(|(s, n)| {
            let (data, n_pad) = model.prepare_input(s, *n)?;
            Ok((data, n_pad))
        })
        .collect::<Result<_, VqError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed.wrapping_add(1));
    let mut adam = AdamState::new(tcfg.lr, &model.params);
    let mut curve = Vec::new();
    let mut usage = vec![0u32; cfg.codebook_size];
    let mut latent_pool: Vec<Vec<f32>> = Vec::new();
    let mut final_mse = f32::INFINITY;
    let mut steps_run = 0;

    for step in 0..tcfg.steps {
        steps_run = step + 1;
        model.params.zero_grads();
        let mut step_loss = 0.0f32;
        for _ in 0..tcfg.batch_size {
            let clip = rng.gen_range(0..prepared.len());
            let (data, n_pad) = &prepared[clip];
            let width = model.width();

            let mut g = Graph::new();
            let x = g.input(&Tensor::from_vec(vec![width, *n_pad], data.clone())?);
            let latents = model.encode_graph(&mut g, x)?;
            let lat_view = super::Latents {
                len: g.shape(latents)[0],
                dim: cfg.code_dim,
                data: g.value(latents).to_vec(),
            };
            let (indices, quantized) = quantize(&model.codebook(), &lat_view)?;
            for &i in &indices {
                usage[i] += 1;
            }
            if latent_pool.len() < 64 {
                let row = rng.gen_range(0..lat_view.len);
                latent_pool
                    .push(lat_view.data[row * cfg.code_dim..(row + 1) * cfg.code_dim].to_vec());
            }

            // Reconstruction path: decoder sees codebook values, encoder
            // receives the reconstruction gradient via straight-through.
            let q_tensor =
                Tensor::from_vec(vec![lat_view.len, cfg.code_dim], quantized)?;
            let q_st = g.straight_through(latents, &q_tensor)?;
            let decoded = model.decode_graph(&mut g, q_st)?;
            let recon = g.mse(decoded, x)?;

            // Codebook term: pull selected codes toward frozen latents.
            let cb_node = g.param(&model.params, model.codebook_id);
            let selected = g.embedding_lookup(cb_node, &indices)?;
            let lat_sg = g.detach(latents);
            let code_term = g.mse(selected, lat_sg)?;

            // Commitment term: pull latents toward frozen codes.
            let sel_sg = g.detach(selected);
            let commit = g.mse(latents, sel_sg)?;

            let commit_scaled = g.scale(commit, cfg.beta);
            let partial = g.add(recon, code_term)?;
            let total = g.add(partial, commit_scaled)?;
            let total_mean = g.scale(total, 1.0 / tcfg.batch_size as f32);

            let loss_val = g.scalar_value(total);
            if !loss_val.is_finite() {
                return Err(VqError::Diverged { step });
            }
            step_loss += loss_val / tcfg.batch_size as f32;
            g.backward(total_mean, &mut model.params)?;
        }
        adam.step(&mut model.params);

        // Dead-code refresh is part of the optimizer step, so a zero
        // learning rate leaves the model fully untouched.
        if tcfg.lr > 0.0
            && tcfg.dead_code_interval > 0
            && (step + 1) % tcfg.dead_code_interval == 0
            && !latent_pool.is_empty()
        {
            let noise = Normal::new(0.0f32, 0.01).expect("finite std");
            let d = cfg.code_dim;
            let cb = model.params.get_mut(model.codebook_id);
            let data = cb.data_mut();
            for k in 0..cfg.codebook_size {
                if usage[k] == 0 {
                    let src = &latent_pool[rng.gen_range(0..latent_pool.len())];
                    for j in 0..d {
                        data[k * d + j] = src[j] + noise.sample(&mut rng);
                    }
                }
            }
            usage.fill(0);
            latent_pool.clear();
        }

        if (step + 1) % tcfg.eval_interval == 0 || step + 1 == tcfg.steps {
            curve.push((step + 1, step_loss));
            final_mse = model.reconstruction_mse(&streams)?;
            if let Some(target) = tcfg.target_recon_mse {
                if final_mse < target {
                    break;
                }
            }
        }
    }

    if !final_mse.is_finite() || final_mse == f32::INFINITY {
        final_mse = model.reconstruction_mse(&streams)?;
    }
    let codes_used = count_codes_used(&model, &streams)?;
    Ok((
        model,
        VqTrainReport {
            curve,
            final_recon_mse: final_mse,
            steps_run,
            codes_used,
        },
    ))
}

fn count_codes_used(
    model: &PartVqModel,
    streams: &[(Vec<f32>, usize)],
) -> Result<usize, VqError> {
    let mut used = vec![false; model.config().codebook_size];
    for (s, n) in streams {
        let lat = model.encode(s, *n)?;
        let (indices, _) = quantize(&model.codebook(), &lat)?;
        for i in indices {
            used[i] = true;
        }
    }
    Ok(used.iter().filter(|&&u| u).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::FEATURE_DIM;

    fn tiny_corpus(count: usize, n: usize) -> Vec<MotionSequence> {
        (0..count)
            .map(|i| {
                let mut m = MotionSequence::zeros(n);
                for t in 0..n {
                    for c in 0..FEATURE_DIM {
                        m.frame_mut(t)[c] =
                            ((t as f32 * 0.3 + c as f32 * 0.01) * (i + 1) as f32 * 0.2).sin();
                    }
                }
                m
            })
            .collect()
    }

    fn tiny_cfg() -> VqConfig {
        VqConfig {
            codebook_size: 32,
            code_dim: 16,
            downsample: 4,
            hidden: 16,
            beta: 0.25,
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let corpus = tiny_corpus(2, 8);
        let cfg = tiny_cfg();
        let init = PartVqModel::new(PartId::Root, cfg.clone(), 5);
        let tcfg = VqTrainConfig {
            steps: 5,
            batch_size: 2,
            lr: 0.0,
            seed: 5,
            ..Default::default()
        };
        let (trained, _) = train_vq(&corpus, PartId::Root, &cfg, &tcfg).unwrap();
        for (pid_a, pid_b) in init.params.ids().zip(trained.params.ids()) {
            assert_eq!(init.params.get(pid_a).data(), trained.params.get(pid_b).data());
        }
    }

    #[test]
    fn same_seed_gives_identical_final_loss() {
        let corpus = tiny_corpus(3, 12);
        let cfg = tiny_cfg();
        let tcfg = VqTrainConfig {
            steps: 30,
            batch_size: 2,
            lr: 1e-3,
            seed: 11,
            eval_interval: 10,
            ..Default::default()
        };
        let (_, r1) = train_vq(&corpus, PartId::LeftArm, &cfg, &tcfg).unwrap();
        let (_, r2) = train_vq(&corpus, PartId::LeftArm, &cfg, &tcfg).unwrap();
        assert_eq!(r1.curve, r2.curve);
        assert_eq!(r1.final_recon_mse.to_bits(), r2.final_recon_mse.to_bits());
    }

    #[test]
    fn empty_corpus_rejected() {
        let cfg = tiny_cfg();
        assert!(matches!(
            train_vq(&[], PartId::Root, &cfg, &VqTrainConfig::default()),
            Err(VqError::EmptyCorpus)
        ));
    }

    #[test]
    fn loss_decreases_on_tiny_corpus() {
        let corpus = tiny_corpus(4, 16);
        let cfg = tiny_cfg();
        let tcfg = VqTrainConfig {
            steps: 120,
            batch_size: 2,
            lr: 2e-3,
            seed: 3,
            eval_interval: 20,
            ..Default::default()
        };
        let (_, report) = train_vq(&corpus, PartId::Backbone, &cfg, &tcfg).unwrap();
        let first = report.curve.first().unwrap().1;
        let last = report.curve.last().unwrap().1;
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn gradient_routing_respects_stop_gradient() {
        // Codebook-term-only loss must leave encoder grads at zero and give
        // the codebook a nonzero grad; recon-only loss must do the reverse.
        let corpus = tiny_corpus(1, 8);
        let cfg = tiny_cfg();
        let mut model = PartVqModel::new(PartId::Root, cfg.clone(), 5);
        let streams: Vec<(Vec<f32>, usize)> =
            corpus.iter().map(|m| part_stream_of(m, PartId::Root)).collect();
        let (mean, std) = corpus_normalization(&streams, model.width());
        model.set_normalization(mean, std);
        let (data, n_pad) = model.prepare_input(&streams[0].0, streams[0].1).unwrap();

        let run = |model: &mut PartVqModel, which: &str| {
            model.params.zero_grads();
            let mut g = Graph::new();
            let x = g
                .input(&Tensor::from_vec(vec![model.width(), n_pad], data.clone()).unwrap());
            let latents = model.encode_graph(&mut g, x).unwrap();
            let lat_view = super::super::Latents {
                len: g.shape(latents)[0],
                dim: model.config().code_dim,
                data: g.value(latents).to_vec(),
            };
            let (indices, quantized) = quantize(&model.codebook(), &lat_view).unwrap();
            let loss = match which {
                "code" => {
                    let cb = g.param(&model.params, model.codebook_id);
                    let selected = g.embedding_lookup(cb, &indices).unwrap();
                    let lat_sg = g.detach(latents);
                    g.mse(selected, lat_sg).unwrap()
                }
                _ => {
                    let q = Tensor::from_vec(
                        vec![lat_view.len, model.config().code_dim],
                        quantized,
                    )
                    .unwrap();
                    let q_st = g.straight_through(latents, &q).unwrap();
                    let decoded = model.decode_graph(&mut g, q_st).unwrap();
                    g.mse(decoded, x).unwrap()
                }
            };
            g.backward(loss, &mut model.params).unwrap();
        };

        run(&mut model, "code");
        let enc_grad_sum: f32 = model
            .params
            .ids()
            .filter(|&p| model.params.name(p).starts_with("enc."))
            .map(|p| model.params.get(p).grad().unwrap().iter().map(|v| v.abs()).sum::<f32>())
            .sum();
        let cb_grad_sum: f32 = model
            .params
            .get(model.codebook_id)
            .grad()
            .unwrap()
            .iter()
            .map(|v| v.abs())
            .sum();
        assert_eq!(enc_grad_sum, 0.0, "sg path leaked into encoder");
        assert!(cb_grad_sum > 0.0, "codebook got no gradient");

        run(&mut model, "recon");
        let enc_grad_sum: f32 = model
            .params
            .ids()
            .filter(|&p| model.params.name(p).starts_with("enc."))
            .map(|p| model.params.get(p).grad().unwrap().iter().map(|v| v.abs()).sum::<f32>())
            .sum();
        let cb_grad_sum: f32 = model
            .params
            .get(model.codebook_id)
            .grad()
            .unwrap()
            .iter()
            .map(|v| v.abs())
            .sum();
        assert!(enc_grad_sum > 0.0, "straight-through gave encoder no gradient");
        assert_eq!(cb_grad_sum, 0.0, "recon path leaked into codebook");
    }
}
