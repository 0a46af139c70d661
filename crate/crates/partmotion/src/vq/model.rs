//! The per-part VQ-VAE model: conv encoder, codebook, conv decoder.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::motion::{PartId, ALL_PARTS, PART_WIDTHS};
use crate::tensor::{Graph, NodeId, ParamId, ParamSet, Tensor};

use super::VqError;

/// Architecture and quantization hyperparameters for one part model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VqConfig {
    /// Codebook entries K.
    pub codebook_size: usize,
    /// Code dimensionality d.
    pub code_dim: usize,
    /// Temporal downsample rate r; must be a power of two (one stride-2
    /// stage per factor of two).
    pub downsample: usize,
    /// Conv channel width.
    pub hidden: usize,
    /// Commitment loss weight.
    pub beta: f32,
}

impl VqConfig {
    /// Defaults: K = 512, r = 4, d = 128 except 64 for the root part.
    pub fn for_part(part: PartId) -> Self {
        VqConfig {
            codebook_size: 512,
            code_dim: if part == PartId::Root { 64 } else { 128 },
            downsample: 4,
            hidden: 64,
            beta: 0.25,
        }
    }

    fn stages(&self) -> usize {
        debug_assert!(self.downsample.is_power_of_two());
        self.downsample.trailing_zeros() as usize
    }
}

/// Borrow-free view of a part codebook (K x d, row-major).
#[derive(Debug, Clone)]
pub struct Codebook {
    pub part: PartId,
    pub entries: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Codebook {
    pub fn vector(&self, k: usize) -> &[f32] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

/// Encoder output: `len` latent rows of `dim` values.
#[derive(Debug, Clone)]
pub struct Latents {
    pub len: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone)]
struct Conv {
    w: ParamId,
    b: ParamId,
    stride: usize,
    pad: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    fn new(
        params: &mut ParamSet,
        name: &str,
        c_in: usize,
        c_out: usize,
        kw: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let std = (2.0 / (c_in * kw) as f32).sqrt();
        let w = params.register(
            format!("{name}.w"),
            Tensor::randn(vec![c_out, c_in, kw], std, rng),
        );
        let b = params.register(format!("{name}.b"), Tensor::zeros(vec![c_out]));
        Conv {
            w,
            b,
            stride,
            pad,
        }
    }

    fn apply(&self, g: &mut Graph, params: &ParamSet, x: NodeId) -> Result<NodeId, VqError> {
        let w = g.param(params, self.w);
        let b = g.param(params, self.b);
        let y = g.conv1d(x, w, self.stride, self.pad)?;
        Ok(g.add_chan(y, b)?)
    }
}

#[derive(Debug, Clone)]
enum Block {
    Conv(Conv),
    Relu,
    /// x + conv2(relu(conv1(x)))
    Residual(Conv, Conv),
    Upsample(usize),
}

impl Block {
    fn apply(&self, g: &mut Graph, params: &ParamSet, x: NodeId) -> Result<NodeId, VqError> {
        match self {
            Block::Conv(c) => c.apply(g, params, x),
            Block::Relu => Ok(g.relu(x)),
            Block::Residual(c1, c2) => {
                let h = c1.apply(g, params, x)?;
                let h = g.relu(h);
                let h = c2.apply(g, params, h)?;
                Ok(g.add(x, h)?)
            }
            Block::Upsample(f) => Ok(g.upsample_nearest(x, *f)?),
        }
    }
}

/// One part's VQ-VAE.
pub struct PartVqModel {
    part: PartId,
    cfg: VqConfig,
    pub(crate) params: ParamSet,
    encoder: Vec<Block>,
    decoder: Vec<Block>,
    pub(crate) codebook_id: ParamId,
    norm_mean: Vec<f32>,
    norm_std: Vec<f32>,
}

impl PartVqModel {
    pub fn new(part: PartId, cfg: VqConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let width = PART_WIDTHS[part.index()];
        let (h, d) = (cfg.hidden, cfg.code_dim);

        let mut encoder = vec![
            Block::Conv(Conv::new(&mut params, "enc.in", width, h, 3, 1, 1, &mut rng)),
            Block::Relu,
        ];
        for s in 0..cfg.stages() {
            encoder.push(Block::Conv(Conv::new(
                &mut params,
                &format!("enc.down{s}"),
                h,
                h,
                4,
                2,
                1,
                &mut rng,
            )));
            encoder.push(Block::Relu);
            encoder.push(Block::Residual(
                Conv::new(&mut params, &format!("enc.res{s}a"), h, h, 3, 1, 1, &mut rng),
                Conv::new(&mut params, &format!("enc.res{s}b"), h, h, 3, 1, 1, &mut rng),
            ));
        }
        encoder.push(Block::Conv(Conv::new(
            &mut params, "enc.out", h, d, 3, 1, 1, &mut rng,
        )));

        let mut decoder = vec![
            Block::Conv(Conv::new(&mut params, "dec.in", d, h, 3, 1, 1, &mut rng)),
            Block::Relu,
        ];
        for s in 0..cfg.stages() {
            decoder.push(Block::Residual(
                Conv::new(&mut params, &format!("dec.res{s}a"), h, h, 3, 1, 1, &mut rng),
                Conv::new(&mut params, &format!("dec.res{s}b"), h, h, 3, 1, 1, &mut rng),
            ));
            decoder.push(Block::Upsample(2));
            decoder.push(Block::Conv(Conv::new(
                &mut params,
                &format!("dec.up{s}"),
                h,
                h,
                3,
                1,
                1,
                &mut rng,
            )));
            decoder.push(Block::Relu);
        }
        decoder.push(Block::Conv(Conv::new(
            &mut params, "dec.out", h, width, 3, 1, 1, &mut rng,
        )));

        let codebook_id = params.register(
            "codebook",
            Tensor::randn(vec![cfg.codebook_size, d], 0.1, &mut rng),
        );

        PartVqModel {
            part,
            cfg,
            params,
            encoder,
            decoder,
            codebook_id,
            norm_mean: vec![0.0; width],
            norm_std: vec![1.0; width],
        }
    }

    pub fn part(&self) -> PartId {
        self.part
    }

    pub fn config(&self) -> &VqConfig {
        &self.cfg
    }

    pub fn width(&self) -> usize {
        PART_WIDTHS[self.part.index()]
    }

    pub fn normalization(&self) -> (&[f32], &[f32]) {
        (&self.norm_mean, &self.norm_std)
    }

    pub fn set_normalization(&mut self, mean: Vec<f32>, std: Vec<f32>) {
        debug_assert_eq!(mean.len(), self.width());
        debug_assert_eq!(std.len(), self.width());
        self.norm_mean = mean;
        self.norm_std = std;
    }

    pub fn codebook(&self) -> Codebook {
        let t = self.params.get(self.codebook_id);
        Codebook {
            part: self.part,
            entries: self.cfg.codebook_size,
            dim: self.cfg.code_dim,
            data: t.data().to_vec(),
        }
    }

    /// Normalizes a frames x width stream, transposes to channels x time,
    /// and edge-pads time up to a multiple of the downsample rate.
    pub(crate) fn prepare_input(&self, stream: &[f32], n: usize) -> Result<(Vec<f32>, usize), VqError> {
        let w = self.width();
        if stream.len() != n * w {
            return Err(VqError::WidthMismatch {
                part: self.part,
                got: if n > 0 { stream.len() / n } else { 0 },
                expected: w,
            });
        }
        let r = self.cfg.downsample;
        let n_pad = n.div_ceil(r) * r;
        let mut out = vec![0.0f32; w * n_pad];
        for t in 0..n_pad {
            let src = t.min(n - 1);
            for c in 0..w {
                out[c * n_pad + t] = (stream[src * w + c] - self.norm_mean[c]) / self.norm_std[c];
            }
        }
        Ok((out, n_pad))
    }

    pub(crate) fn encode_graph(
        &self,
        g: &mut Graph,
        x: NodeId,
    ) -> Result<NodeId, VqError> {
        let mut h = x;
        for block in &self.encoder {
            h = block.apply(g, &self.params, h)?;
        }
        // d x T' -> T' x d
        Ok(g.transpose(h)?)
    }

    pub(crate) fn decode_graph(
        &self,
        g: &mut Graph,
        codes: NodeId,
    ) -> Result<NodeId, VqError> {
        // T' x d -> d x T'
        let mut h = g.transpose(codes)?;
        for block in &self.decoder {
            h = block.apply(g, &self.params, h)?;
        }
        Ok(h)
    }

    /// Frames x width stream -> ceil(n / r) latent rows.
    pub fn encode(&self, stream: &[f32], n: usize) -> Result<Latents, VqError> {
        let (data, n_pad) = self.prepare_input(stream, n)?;
        let mut g = Graph::new();
        let x = g.input(&Tensor::from_vec(vec![self.width(), n_pad], data)?);
        let lat = self.encode_graph(&mut g, x)?;
        let t_len = g.shape(lat)[0];
        Ok(Latents {
            len: t_len,
            dim: self.cfg.code_dim,
            data: g.value(lat).to_vec(),
        })
    }

    /// Token indices -> frames x width stream (denormalized). Output length
    /// is r * len(indices), cropped to `source_len` when provided.
    pub fn decode(&self, indices: &[usize], source_len: Option<usize>) -> Result<Vec<f32>, VqError> {
        let k = self.cfg.codebook_size;
        for &i in indices {
            if i >= k {
                return Err(VqError::TokenOutOfRange { index: i, size: k });
            }
        }
        let cb = self.codebook();
        let d = self.cfg.code_dim;
        let mut codes = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            codes.extend_from_slice(cb.vector(i));
        }
        let mut g = Graph::new();
        let c = g.input(&Tensor::from_vec(vec![indices.len(), d], codes)?);
        let out = self.decode_graph(&mut g, c)?;
        let n_full = g.shape(out)[1];
        let n = source_len.unwrap_or(n_full).min(n_full);
        let w = self.width();
        let vals = g.value(out);
        let mut stream = vec![0.0f32; n * w];
        for t in 0..n {
            for c_i in 0..w {
                stream[t * w + c_i] =
                    vals[c_i * n_full + t] * self.norm_std[c_i] + self.norm_mean[c_i];
            }
        }
        Ok(stream)
    }

    /// Mean squared reconstruction error per feature dimension, measured in
    /// the normalized space the model trains in.
    pub fn reconstruction_mse(&self, clips: &[(Vec<f32>, usize)]) -> Result<f32, VqError> {
        let mut total = 0.0f64;
        let mut count = 0usize;
        for (stream, n) in clips {
            let (norm_cn, n_pad) = self.prepare_input(stream, *n)?;
            let latents = self.encode(stream, *n)?;
            let (indices, _) = super::quantize(&self.codebook(), &latents)?;
            let cb = self.codebook();
            let d = self.cfg.code_dim;
            let mut codes = Vec::with_capacity(indices.len() * d);
            for &i in &indices {
                codes.extend_from_slice(cb.vector(i));
            }
            let mut g = Graph::new();
            let c = g.input(&Tensor::from_vec(vec![indices.len(), d], codes)?);
            let out = self.decode_graph(&mut g, c)?;
            let vals = g.value(out);
            let w = self.width();
            for t in 0..*n {
                for ci in 0..w {
                    let diff = vals[ci * n_pad + t] as f64 - norm_cn[ci * n_pad + t] as f64;
                    total += diff * diff;
                    count += 1;
                }
            }
        }
        Ok((total / count.max(1) as f64) as f32)
    }

    /// Writes `{prefix}.pmtn` (parameters) and `{prefix}.json` (manifest).
    pub fn save(&self, prefix: &Path) -> std::io::Result<()> {
        let manifest = VqManifest {
            format_version: 1,
            part: self.part,
            config: self.cfg.clone(),
            norm_mean: self.norm_mean.clone(),
            norm_std: self.norm_std.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(prefix.with_extension("json"), json)?;
        crate::tensor::save_tensors(&self.params, &prefix.with_extension("pmtn"))
            .map_err(std::io::Error::other)?;
        Ok(())
    }

    pub fn load(prefix: &Path) -> std::io::Result<Self> {
        let json = std::fs::read_to_string(prefix.with_extension("json"))?;
        let manifest: VqManifest = serde_json::from_str(&json)?;
        let mut model = PartVqModel::new(manifest.part, manifest.config, 0);
        model.norm_mean = manifest.norm_mean;
        model.norm_std = manifest.norm_std;
        crate::tensor::load_into(&mut model.params, &prefix.with_extension("pmtn"))
            .map_err(std::io::Error::other)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct VqManifest {
    format_version: u32,
    part: PartId,
    config: VqConfig,
    norm_mean: Vec<f32>,
    norm_std: Vec<f32>,
}

/// Per-feature mean/std of one part's stream over a corpus, with a floor on
/// std so constant features normalize to exactly zero.
pub(crate) fn corpus_normalization(
    streams: &[(Vec<f32>, usize)],
    width: usize,
) -> (Vec<f32>, Vec<f32>) {
    let mut mean = vec![0.0f64; width];
    let mut count = 0usize;
    for (s, n) in streams {
        for t in 0..*n {
            for c in 0..width {
                mean[c] += s[t * width + c] as f64;
            }
        }
        count += n;
    }
    for m in mean.iter_mut() {
        *m /= count.max(1) as f64;
    }
    let mut var = vec![0.0f64; width];
    for (s, n) in streams {
        for t in 0..*n {
            for c in 0..width {
                let d = s[t * width + c] as f64 - mean[c];
                var[c] += d * d;
            }
        }
    }
    let std: Vec<f32> = var
        .iter()
        .map(|&v| ((v / count.max(1) as f64).sqrt() as f32).max(1e-4))
        .collect();
    (mean.iter().map(|&m| m as f32).collect(), std)
}

/// All-parts convenience used by training pipelines.
pub fn part_stream_of(m: &crate::motion::MotionSequence, part: PartId) -> (Vec<f32>, usize) {
    let parts = crate::motion::partition(m);
    (parts.stream(part).to_vec(), m.num_frames())
}

#[allow(dead_code)]
fn _assert_parts_cover() {
    // Compile-time reminder that widths are keyed by PartId::index.
    let _ = ALL_PARTS;
}
