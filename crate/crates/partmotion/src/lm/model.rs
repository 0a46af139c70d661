//! The encoder-decoder transformer.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{kernel, Graph, NodeId, ParamId, ParamSet, Tensor};
use crate::vocab::{BOS, EOS, PAD};

use super::LmError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeqModelConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    /// Hard-capped at 512.
    pub max_input_len: usize,
    pub vocab_size: usize,
}

impl SeqModelConfig {
    /// Two layers each side, dim 128, 4 heads, feed-forward 256.
    pub fn toy(vocab_size: usize) -> Self {
        SeqModelConfig {
            encoder_layers: 2,
            decoder_layers: 2,
            model_dim: 128,
            heads: 4,
            ff_dim: 256,
            max_input_len: 512,
            vocab_size,
        }
    }

    fn validate(&self) -> Result<(), LmError> {
        if self.max_input_len > 512 {
            return Err(LmError::MaxLenTooLarge(self.max_input_len));
        }
        if self.model_dim % self.heads != 0 {
            return Err(LmError::BadHeads {
                dim: self.model_dim,
                heads: self.heads,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct AttnIds {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct LnIds {
    g: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct FfIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct EncLayer {
    ln1: LnIds,
    attn: AttnIds,
    ln2: LnIds,
    ff: FfIds,
}

#[derive(Debug, Clone, Copy)]
struct DecLayer {
    ln1: LnIds,
    self_attn: AttnIds,
    ln2: LnIds,
    cross_attn: AttnIds,
    ln3: LnIds,
    ff: FfIds,
}

/// Sampling controls for [`SeqModel::generate`]. Temperature 0 is greedy.
#[derive(Debug, Clone)]
pub struct DecodeConfig {
    pub max_new_tokens: usize,
    pub temperature: f32,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_new_tokens: 160,
            temperature: 0.0,
            top_k: 0,
            seed: 0,
        }
    }
}

pub struct SeqModel {
    cfg: SeqModelConfig,
    pub(crate) params: ParamSet,
    embed: ParamId,
    pos_enc: ParamId,
    pos_dec: ParamId,
    enc_layers: Vec<EncLayer>,
    dec_layers: Vec<DecLayer>,
    enc_final: LnIds,
    dec_final: LnIds,
    out_proj: ParamId,
}

impl SeqModel {
    pub fn new(cfg: SeqModelConfig, seed: u64) -> Result<Self, LmError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = cfg.model_dim;
        let std = 0.02f32;

        let embed = params.register(
            "embed",
            Tensor::randn(vec![cfg.vocab_size, d], std, &mut rng),
        );
        let pos_enc = params.register(
            "pos_enc",
            Tensor::randn(vec![cfg.max_input_len, d], 0.01, &mut rng),
        );
        let pos_dec = params.register(
            "pos_dec",
            Tensor::randn(vec![cfg.max_input_len, d], 0.01, &mut rng),
        );

        let ln = |params: &mut ParamSet, name: &str| LnIds {
            g: params.register(format!("{name}.g"), {
                Tensor::from_vec(vec![d], vec![1.0; d]).expect("shape")
            }),
            b: params.register(format!("{name}.b"), Tensor::zeros(vec![d])),
        };
        let attn = |params: &mut ParamSet, name: &str, rng: &mut ChaCha8Rng| AttnIds {
            wq: params.register(format!("{name}.wq"), Tensor::randn(vec![d, d], std, rng)),
            wk: params.register(format!("{name}.wk"), Tensor::randn(vec![d, d], std, rng)),
            wv: params.register(format!("{name}.wv"), Tensor::randn(vec![d, d], std, rng)),
            wo: params.register(format!("{name}.wo"), Tensor::randn(vec![d, d], std, rng)),
        };
        let ff = |params: &mut ParamSet, name: &str, rng: &mut ChaCha8Rng| FfIds {
            w1: params.register(
                format!("{name}.w1"),
                Tensor::randn(vec![d, cfg.ff_dim], std, rng),
            ),
            b1: params.register(format!("{name}.b1"), Tensor::zeros(vec![cfg.ff_dim])),
            w2: params.register(
                format!("{name}.w2"),
                Tensor::randn(vec![cfg.ff_dim, d], std, rng),
            ),
            b2: params.register(format!("{name}.b2"), Tensor::zeros(vec![d])),
        };

        let mut enc_layers = Vec::with_capacity(cfg.encoder_layers);
        for i in 0..cfg.encoder_layers {
            enc_layers.push(EncLayer {
                ln1: ln(&mut params, &format!("enc{i}.ln1")),
                attn: attn(&mut params, &format!("enc{i}.attn"), &mut rng),
                ln2: ln(&mut params, &format!("enc{i}.ln2")),
                ff: ff(&mut params, &format!("enc{i}.ff"), &mut rng),
            });
        }
        let enc_final = ln(&mut params, "enc.final");
        let mut dec_layers = Vec::with_capacity(cfg.decoder_layers);
        for i in 0..cfg.decoder_layers {
            dec_layers.push(DecLayer {
                ln1: ln(&mut params, &format!("dec{i}.ln1")),
                self_attn: attn(&mut params, &format!("dec{i}.self"), &mut rng),
                ln2: ln(&mut params, &format!("dec{i}.ln2")),
                cross_attn: attn(&mut params, &format!("dec{i}.cross"), &mut rng),
                ln3: ln(&mut params, &format!("dec{i}.ln3")),
                ff: ff(&mut params, &format!("dec{i}.ff"), &mut rng),
            });
        }
        let dec_final = ln(&mut params, "dec.final");
        let out_proj = params.register(
            "out_proj",
            Tensor::randn(vec![d, cfg.vocab_size], std, &mut rng),
        );

        Ok(SeqModel {
            cfg,
            params,
            embed,
            pos_enc,
            pos_dec,
            enc_layers,
            dec_layers,
            enc_final,
            dec_final,
            out_proj,
        })
    }

    pub fn config(&self) -> &SeqModelConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.params.numel()
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), LmError> {
        for &id in ids {
            if id as usize >= self.cfg.vocab_size {
                return Err(LmError::TokenOutOfRange {
                    id,
                    size: self.cfg.vocab_size,
                });
            }
        }
        Ok(())
    }

    fn layer_norm(&self, g: &mut Graph, x: NodeId, ids: LnIds) -> Result<NodeId, LmError> {
        let normed = g.layer_norm(x, 1e-5)?;
        let gain = g.param(&self.params, ids.g);
        let bias = g.param(&self.params, ids.b);
        let scaled = g.mul_row(normed, gain)?;
        Ok(g.add_row(scaled, bias)?)
    }

    fn feed_forward(&self, g: &mut Graph, x: NodeId, ids: FfIds) -> Result<NodeId, LmError> {
        let w1 = g.param(&self.params, ids.w1);
        let b1 = g.param(&self.params, ids.b1);
        let w2 = g.param(&self.params, ids.w2);
        let b2 = g.param(&self.params, ids.b2);
        let h = g.matmul(x, w1)?;
        let h = g.add_row(h, b1)?;
        let h = g.relu(h);
        let h = g.matmul(h, w2)?;
        Ok(g.add_row(h, b2)?)
    }

    /// Multi-head attention; `mask` is an additive Lq x Lk matrix.
    fn attention(
        &self,
        g: &mut Graph,
        queries: NodeId,
        keys_values: NodeId,
        ids: AttnIds,
        mask: Option<&Tensor>,
    ) -> Result<NodeId, LmError> {
        let d = self.cfg.model_dim;
        let heads = self.cfg.heads;
        let dh = d / heads;
        let wq = g.param(&self.params, ids.wq);
        let wk = g.param(&self.params, ids.wk);
        let wv = g.param(&self.params, ids.wv);
        let q = g.matmul(queries, wq)?;
        let k = g.matmul(keys_values, wk)?;
        let v = g.matmul(keys_values, wv)?;
        let mask_node = mask.map(|m| g.input(m));
        let mut head_outputs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = g.slice_cols(q, h * dh, dh)?;
            let kh = g.slice_cols(k, h * dh, dh)?;
            let vh = g.slice_cols(v, h * dh, dh)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scaled = g.scale(scores, 1.0 / (dh as f32).sqrt());
            let masked = match mask_node {
                Some(m) => g.add(scaled, m)?,
                None => scaled,
            };
            let weights = g.softmax(masked)?;
            head_outputs.push(g.matmul(weights, vh)?);
        }
        let concat = g.concat_cols(&head_outputs)?;
        let wo = g.param(&self.params, ids.wo);
        Ok(g.matmul(concat, wo)?)
    }

    fn embed_tokens(
        &self,
        g: &mut Graph,
        ids: &[u32],
        pos_table: ParamId,
    ) -> Result<NodeId, LmError> {
        let table = g.param(&self.params, self.embed);
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let tok = g.embedding_lookup(table, &idx)?;
        let pos_tab = g.param(&self.params, pos_table);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let pos = g.embedding_lookup(pos_tab, &positions)?;
        Ok(g.add(tok, pos)?)
    }

    /// Additive mask hiding `<pad>` key positions from all queries.
    fn pad_mask(input: &[u32], query_len: usize) -> Option<Tensor> {
        if !input.contains(&PAD) {
            return None;
        }
        let lk = input.len();
        let mut data = vec![0.0f32; query_len * lk];
        for (j, &id) in input.iter().enumerate() {
            if id == PAD {
                for i in 0..query_len {
                    data[i * lk + j] = -1e9;
                }
            }
        }
        Some(Tensor::from_vec(vec![query_len, lk], data).expect("shape"))
    }

    fn causal_mask(len: usize) -> Tensor {
        let mut data = vec![0.0f32; len * len];
        for i in 0..len {
            for j in (i + 1)..len {
                data[i * len + j] = -1e9;
            }
        }
        Tensor::from_vec(vec![len, len], data).expect("shape")
    }

    /// Encoder stack over the full input; `<pad>` keys are masked out.
    pub(crate) fn encode(&self, g: &mut Graph, input: &[u32]) -> Result<NodeId, LmError> {
        if input.len() > self.cfg.max_input_len {
            return Err(LmError::InputTooLong {
                got: input.len(),
                max: self.cfg.max_input_len,
            });
        }
        self.check_ids(input)?;
        let mask = Self::pad_mask(input, input.len());
        let mut x = self.embed_tokens(g, input, self.pos_enc)?;
        for layer in &self.enc_layers {
            let normed = self.layer_norm(g, x, layer.ln1)?;
            let attn = self.attention(g, normed, normed, layer.attn, mask.as_ref())?;
            x = g.add(x, attn)?;
            let normed = self.layer_norm(g, x, layer.ln2)?;
            let ff = self.feed_forward(g, normed, layer.ff)?;
            x = g.add(x, ff)?;
        }
        self.layer_norm(g, x, self.enc_final)
    }

    /// Decoder stack over the target prefix, returning final hidden states.
    pub(crate) fn decode_hidden(
        &self,
        g: &mut Graph,
        enc_out: NodeId,
        enc_input: &[u32],
        prefix: &[u32],
    ) -> Result<NodeId, LmError> {
        if prefix.len() > self.cfg.max_input_len {
            return Err(LmError::InputTooLong {
                got: prefix.len(),
                max: self.cfg.max_input_len,
            });
        }
        self.check_ids(prefix)?;
        let causal = Self::causal_mask(prefix.len());
        let cross_mask = Self::pad_mask(enc_input, prefix.len());
        let mut x = self.embed_tokens(g, prefix, self.pos_dec)?;
        for layer in &self.dec_layers {
            let normed = self.layer_norm(g, x, layer.ln1)?;
            let attn = self.attention(g, normed, normed, layer.self_attn, Some(&causal))?;
            x = g.add(x, attn)?;
            let normed = self.layer_norm(g, x, layer.ln2)?;
            let cross = self.attention(g, normed, enc_out, layer.cross_attn, cross_mask.as_ref())?;
            x = g.add(x, cross)?;
            let normed = self.layer_norm(g, x, layer.ln3)?;
            let ff = self.feed_forward(g, normed, layer.ff)?;
            x = g.add(x, ff)?;
        }
        self.layer_norm(g, x, self.dec_final)
    }

    /// Full forward pass inside an existing graph; returns the logits node.
    pub(crate) fn forward_graph(
        &self,
        g: &mut Graph,
        input: &[u32],
        prefix: &[u32],
    ) -> Result<NodeId, LmError> {
        let enc_out = self.encode(g, input)?;
        let hidden = self.decode_hidden(g, enc_out, input, prefix)?;
        let proj = g.param(&self.params, self.out_proj);
        Ok(g.matmul(hidden, proj)?)
    }

    /// One logit row per target-prefix position, causally masked.
    pub fn forward(&self, input: &[u32], prefix: &[u32]) -> Result<Tensor, LmError> {
        let mut g = Graph::new();
        let logits = self.forward_graph(&mut g, input, prefix)?;
        Ok(g.to_tensor(logits))
    }

    /// Mean per-token negative log-likelihood of a batch, with gradients
    /// accumulated into the parameters when `train` is set.
    pub fn batch_loss(
        &mut self,
        batch: &[&super::TrainingTask],
        train: bool,
    ) -> Result<f32, LmError> {
        if batch.is_empty() {
            return Err(LmError::EmptyBatch);
        }
        let total_tokens: usize = batch.iter().map(|t| t.target.len()).sum();
        let mut total_nll = 0.0f64;
        for task in batch {
            let mut prefix = Vec::with_capacity(task.target.len());
            prefix.push(BOS);
            prefix.extend_from_slice(&task.target[..task.target.len() - 1]);
            let targets: Vec<usize> = task.target.iter().map(|&t| t as usize).collect();

            let mut g = Graph::new();
            let logits = self.forward_graph(&mut g, &task.input, &prefix)?;
            let ce = g.softmax_cross_entropy(logits, &targets)?;
            let ce_val = g.scalar_value(ce) as f64;
            total_nll += ce_val * task.target.len() as f64;
            if train {
                let scaled = g.scale(ce, task.target.len() as f32 / total_tokens as f32);
                g.backward(scaled, &mut self.params)?;
            }
        }
        Ok((total_nll / total_tokens as f64) as f32)
    }

    /// Greedy or sampled autoregressive decoding. Returns generated ids
    /// without the begin token; a trailing `<eos>` is stripped.
    pub fn generate(&self, input: &[u32], cfg: &DecodeConfig) -> Result<Vec<u32>, LmError> {
        let mut g = Graph::new();
        let enc_out = self.encode(&mut g, input)?;
        let enc_tensor = g.to_tensor(enc_out);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut prefix = vec![BOS];
        let mut out = Vec::new();
        for _ in 0..cfg.max_new_tokens {
            if prefix.len() >= self.cfg.max_input_len {
                break;
            }
            let mut g = Graph::new();
            let enc_node = g.input(&enc_tensor);
            let hidden = self.decode_hidden(&mut g, enc_node, input, &prefix)?;
            // Only the last row feeds the next-token distribution.
            let d = self.cfg.model_dim;
            let last = &g.value(hidden)[(prefix.len() - 1) * d..prefix.len() * d];
            let proj = self.params.get(self.out_proj);
            let mut logits = vec![0.0f32; self.cfg.vocab_size];
            kernel::matmul(last, proj.data(), &mut logits, 1, d, self.cfg.vocab_size);

            let next = if cfg.temperature <= 0.0 {
                argmax(&logits)
            } else {
                sample_top_k(&logits, cfg.temperature, cfg.top_k, &mut rng)
            };
            if next == EOS {
                break;
            }
            out.push(next);
            prefix.push(next);
        }
        Ok(out)
    }

    /// Writes `{prefix}.pmtn` plus a JSON config sidecar.
    pub fn save(&self, prefix: &Path) -> std::io::Result<()> {
        let sidecar = serde_json::json!({
            "format_version": 1,
            "config": &self.cfg,
        });
        std::fs::write(
            prefix.with_extension("json"),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        crate::tensor::save_tensors(&self.params, &prefix.with_extension("pmtn"))
            .map_err(std::io::Error::other)
    }

    pub fn load(prefix: &Path) -> std::io::Result<Self> {
        let sidecar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json"))?)?;
        let cfg: SeqModelConfig = serde_json::from_value(sidecar["config"].clone())?;
        let mut model = SeqModel::new(cfg, 0).map_err(std::io::Error::other)?;
        crate::tensor::load_into(&mut model.params, &prefix.with_extension("pmtn"))
            .map_err(std::io::Error::other)?;
        Ok(model)
    }
}

fn argmax(logits: &[f32]) -> u32 {
    let mut best = 0usize;
    let mut best_val = f32::NEG_INFINITY;
    for (i, &v) in logits.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best as u32
}

fn sample_top_k(logits: &[f32], temperature: f32, top_k: usize, rng: &mut ChaCha8Rng) -> u32 {
    let mut scored: Vec<(usize, f32)> = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, v / temperature))
        .collect();
    if top_k > 0 && top_k < scored.len() {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
    }
    let max = scored
        .iter()
        .map(|(_, v)| *v)
        .fold(f32::NEG_INFINITY, f32::max);
    let weights: Vec<f64> = scored.iter().map(|(_, v)| ((v - max) as f64).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for ((i, _), w) in scored.iter().zip(&weights) {
        draw -= w;
        if draw <= 0.0 {
            return *i as u32;
        }
    }
    scored.last().map(|(i, _)| *i as u32).unwrap_or(EOS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(vocab: usize) -> SeqModel {
        let mut cfg = SeqModelConfig::toy(vocab);
        cfg.model_dim = 32;
        cfg.ff_dim = 64;
        cfg.heads = 2;
        cfg.max_input_len = 64;
        SeqModel::new(cfg, 42).unwrap()
    }

    #[test]
    fn single_prefix_token_gives_one_logit_row() {
        let m = tiny_model(50);
        let logits = m.forward(&[5, 6, 7], &[BOS]).unwrap();
        assert_eq!(logits.shape(), &[1, 50]);
    }

    #[test]
    fn over_length_input_is_rejected() {
        let m = tiny_model(50);
        let long = vec![3u32; 65];
        assert!(matches!(
            m.forward(&long, &[BOS]),
            Err(LmError::InputTooLong { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SeqModelConfig::toy(10);
        cfg.max_input_len = 513;
        assert!(matches!(
            SeqModel::new(cfg, 0),
            Err(LmError::MaxLenTooLarge(513))
        ));
        let mut cfg = SeqModelConfig::toy(10);
        cfg.model_dim = 30;
        cfg.heads = 4;
        assert!(matches!(SeqModel::new(cfg, 0), Err(LmError::BadHeads { .. })));
    }

    #[test]
    fn appended_padding_leaves_logits_unchanged() {
        let m = tiny_model(50);
        let base = m.forward(&[5, 6, 7], &[BOS, 9, 10]).unwrap();
        let padded = m.forward(&[5, 6, 7, PAD, PAD], &[BOS, 9, 10]).unwrap();
        for (a, b) in base.data().iter().zip(padded.data()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn decoder_causality_under_perturbation() {
        let m = tiny_model(50);
        let input = [3u32, 4, 5];
        let prefix_a = [BOS, 10, 11, 12, 13];
        let mut prefix_b = prefix_a;
        prefix_b[3] = 40; // perturb target token at position 3
        let a = m.forward(&input, &prefix_a).unwrap();
        let b = m.forward(&input, &prefix_b).unwrap();
        let v = 50;
        // Rows before the perturbed position are untouched.
        for row in 0..3 {
            assert_eq!(
                a.data()[row * v..(row + 1) * v],
                b.data()[row * v..(row + 1) * v],
                "row {row} changed"
            );
        }
        // The perturbed and later rows must differ (sanity that the
        // perturbation actually reached the model).
        assert_ne!(a.data()[3 * v..4 * v], b.data()[3 * v..4 * v]);
    }

    #[test]
    fn untrained_loss_is_near_ln_v() {
        let mut m = tiny_model(64);
        let task = super::super::TrainingTask::new(
            super::super::TaskKind::Compose,
            vec![5, 6, 7],
            vec![8, 9, 10, EOS],
        )
        .unwrap();
        let loss = m.batch_loss(&[&task], false).unwrap();
        let ln_v = (64.0f32).ln();
        assert!(
            (loss - ln_v).abs() / ln_v < 0.15,
            "loss {loss} too far from ln V {ln_v}"
        );
    }

    #[test]
    fn loss_matches_manual_cross_entropy_oracle() {
        let mut m = tiny_model(32);
        let input = vec![3u32, 4];
        let target = vec![5u32, 6, EOS];
        let task =
            super::super::TrainingTask::new(super::super::TaskKind::Compose, input.clone(), target.clone())
                .unwrap();
        let loss = m.batch_loss(&[&task], false).unwrap();
        // Manual per-token oracle from the raw logits.
        let logits = m.forward(&input, &[BOS, 5, 6]).unwrap();
        let v = 32;
        let mut total = 0.0f64;
        for (row, &t) in target.iter().enumerate() {
            let vals: Vec<f64> = logits.data()[row * v..(row + 1) * v]
                .iter()
                .map(|&x| x as f64)
                .collect();
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = vals.iter().map(|x| (x - max).exp()).sum();
            total += max + denom.ln() - vals[t as usize];
        }
        let want = total / 3.0;
        assert!((loss as f64 - want).abs() < 1e-5, "{loss} vs {want}");
    }

    #[test]
    fn temperature_zero_equals_greedy() {
        let m = tiny_model(40);
        let greedy = m
            .generate(
                &[3, 4, 5],
                &DecodeConfig {
                    max_new_tokens: 8,
                    temperature: 0.0,
                    ..Default::default()
                },
            )
            .unwrap();
        // Near-zero temperature concentrates all sampling mass on the
        // argmax, matching greedy output.
        let sampled = m
            .generate(
                &[3, 4, 5],
                &DecodeConfig {
                    max_new_tokens: 8,
                    temperature: 1e-4,
                    top_k: 1,
                    seed: 9,
                },
            )
            .unwrap();
        assert_eq!(greedy, sampled);
    }

    #[test]
    fn length_cap_is_respected() {
        let m = tiny_model(40);
        let out = m
            .generate(
                &[3, 4],
                &DecodeConfig {
                    max_new_tokens: 8,
                    ..Default::default()
                },
            )
            .unwrap();
        assert!(out.len() <= 8);
    }

    #[test]
    fn save_load_reproduces_logits() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("lm");
        let m = tiny_model(30);
        m.save(&prefix).unwrap();
        let loaded = SeqModel::load(&prefix).unwrap();
        let a = m.forward(&[3, 4], &[BOS, 7]).unwrap();
        let b = loaded.forward(&[3, 4], &[BOS, 7]).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
