//! Define-by-run computation graph.
//!
//! Every operation executes eagerly and records a node; nodes are appended
//! in execution order, so the node list is already a topological order and
//! [`Graph::backward`] simply walks it in reverse. A fresh graph is built
//! per forward pass.

use super::kernel;
use super::{ParamId, ParamSet, Tensor, TensorError};

/// Handle to a node inside a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<ParamId> },
    Add,
    Sub,
    Mul,
    Scale(f32),
    AddRow,
    MulRow,
    AddChan,
    MatMul,
    Transpose,
    Conv1d { stride: usize, pad: usize },
    UpsampleNearest { factor: usize },
    Relu,
    LayerNorm { eps: f32 },
    Softmax,
    L2NormalizeRows { eps: f32 },
    EmbeddingLookup { ids: Vec<usize> },
    SoftmaxCrossEntropy { targets: Vec<usize> },
    SumAll,
    MeanAll,
    SliceCols { start: usize, width: usize },
    ConcatCols,
    Detach,
    StraightThrough,
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    shape: Vec<usize>,
    value: Vec<f32>,
}

/// Operation recorder and gradient engine.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, shape: Vec<usize>, value: Vec<f32>) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            inputs,
            shape,
            value,
        });
        id
    }

    pub fn value(&self, id: NodeId) -> &[f32] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar_value(&self, id: NodeId) -> f32 {
        self.nodes[id.0].value[0]
    }

    pub fn to_tensor(&self, id: NodeId) -> Tensor {
        Tensor::from_vec(self.nodes[id.0].shape.clone(), self.nodes[id.0].value.clone())
            .expect("node invariant")
    }

    fn dims2(&self, id: NodeId, op: &'static str) -> Result<(usize, usize), TensorError> {
        let s = self.shape(id);
        if s.len() != 2 {
            return Err(TensorError::Invalid {
                op,
                msg: format!("expected a 2-d tensor, got shape {:?}", s),
            });
        }
        Ok((s[0], s[1]))
    }

    // ── Leaves ───────────────────────────────────────────────────────

    /// Constant input; no gradient is tracked for it.
    pub fn input(&mut self, t: &Tensor) -> NodeId {
        self.push(
            Op::Leaf { param: None },
            vec![],
            t.shape().to_vec(),
            t.data().to_vec(),
        )
    }

    /// Parameter leaf; backward accumulates into the parameter's grad buffer.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        let t = params.get(id);
        self.push(
            Op::Leaf { param: Some(id) },
            vec![],
            t.shape().to_vec(),
            t.data().to_vec(),
        )
    }

    // ── Element-wise ─────────────────────────────────────────────────

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        op: Op,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<NodeId, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op: op_name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let value: Vec<f32> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, vec![a, b], shape, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.binary_same_shape("add", Op::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.binary_same_shape("sub", Op::Sub, a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.binary_same_shape("mul", Op::Mul, a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, x: NodeId, c: f32) -> NodeId {
        let value: Vec<f32> = self.nodes[x.0].value.iter().map(|&v| v * c).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Scale(c), vec![x], shape, value)
    }

    /// x (rows x cols) + b (cols), broadcast over rows.
    pub fn add_row(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "add_row")?;
        if self.shape(b) != [cols] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut value = self.nodes[x.0].value.clone();
        for r in 0..rows {
            for c in 0..cols {
                value[r * cols + c] += self.nodes[b.0].value[c];
            }
        }
        Ok(self.push(Op::AddRow, vec![x, b], vec![rows, cols], value))
    }

    /// x (rows x cols) * g (cols), broadcast over rows.
    pub fn mul_row(&mut self, x: NodeId, g: NodeId) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "mul_row")?;
        if self.shape(g) != [cols] {
            return Err(TensorError::ShapeMismatch {
                op: "mul_row",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(g).to_vec(),
            });
        }
        let mut value = self.nodes[x.0].value.clone();
        for r in 0..rows {
            for c in 0..cols {
                value[r * cols + c] *= self.nodes[g.0].value[c];
            }
        }
        Ok(self.push(Op::MulRow, vec![x, g], vec![rows, cols], value))
    }

    /// x (channels x n) + b (channels), broadcast over time.
    pub fn add_chan(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (chans, n) = self.dims2(x, "add_chan")?;
        if self.shape(b) != [chans] {
            return Err(TensorError::ShapeMismatch {
                op: "add_chan",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut value = self.nodes[x.0].value.clone();
        for c in 0..chans {
            let bv = self.nodes[b.0].value[c];
            for t in 0..n {
                value[c * n + t] += bv;
            }
        }
        Ok(self.push(Op::AddChan, vec![x, b], vec![chans, n], value))
    }

    // ── Linear algebra ───────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut value = vec![0.0f32; m * n];
        kernel::matmul(
            &self.nodes[a.0].value,
            &self.nodes[b.0].value,
            &mut value,
            m,
            k,
            n,
        );
        Ok(self.push(Op::MatMul, vec![a, b], vec![m, n], value))
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "transpose")?;
        let mut value = vec![0.0f32; rows * cols];
        kernel::transpose(&self.nodes[x.0].value, &mut value, rows, cols);
        Ok(self.push(Op::Transpose, vec![x], vec![cols, rows], value))
    }

    /// Cross-correlation of x (c_in x n) with kernels (c_out x c_in x kw),
    /// zero-padded by `pad` on both sides.
    pub fn conv1d(
        &mut self,
        x: NodeId,
        w: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId, TensorError> {
        let (c_in, n) = self.dims2(x, "conv1d")?;
        let ws = self.shape(w).to_vec();
        if ws.len() != 3 || ws[1] != c_in {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: vec![c_in, n],
                rhs: ws,
            });
        }
        let (c_out, kw) = (ws[0], ws[2]);
        if stride == 0 {
            return Err(TensorError::Invalid {
                op: "conv1d",
                msg: "stride must be >= 1".into(),
            });
        }
        if kw > n + 2 * pad {
            return Err(TensorError::Invalid {
                op: "conv1d",
                msg: format!(
                    "kernel width {} exceeds padded input length {}",
                    kw,
                    n + 2 * pad
                ),
            });
        }
        let n_out = (n + 2 * pad - kw) / stride + 1;
        let mut value = vec![0.0f32; c_out * n_out];
        kernel::conv1d(
            &self.nodes[x.0].value,
            &self.nodes[w.0].value,
            &mut value,
            c_in,
            n,
            c_out,
            kw,
            stride,
            pad,
        );
        Ok(self.push(
            Op::Conv1d { stride, pad },
            vec![x, w],
            vec![c_out, n_out],
            value,
        ))
    }

    /// Nearest-neighbor upsampling along time: out[c][t] = x[c][t / factor].
    pub fn upsample_nearest(&mut self, x: NodeId, factor: usize) -> Result<NodeId, TensorError> {
        let (chans, n) = self.dims2(x, "upsample_nearest")?;
        if factor == 0 {
            return Err(TensorError::Invalid {
                op: "upsample_nearest",
                msg: "factor must be >= 1".into(),
            });
        }
        let n_out = n * factor;
        let mut value = vec![0.0f32; chans * n_out];
        for c in 0..chans {
            for t in 0..n_out {
                value[c * n_out + t] = self.nodes[x.0].value[c * n + t / factor];
            }
        }
        Ok(self.push(
            Op::UpsampleNearest { factor },
            vec![x],
            vec![chans, n_out],
            value,
        ))
    }

    // ── Nonlinearities and normalization ─────────────────────────────

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value: Vec<f32> = self.nodes[x.0].value.iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Relu, vec![x], shape, value)
    }

    /// Row-wise normalization to zero mean / unit variance (no affine).
    pub fn layer_norm(&mut self, x: NodeId, eps: f32) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "layer_norm")?;
        let src = &self.nodes[x.0].value;
        let mut value = vec![0.0f32; rows * cols];
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let mean = row.iter().sum::<f32>() / cols as f32;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / cols as f32;
            let inv = 1.0 / (var + eps).sqrt();
            for c in 0..cols {
                value[r * cols + c] = (row[c] - mean) * inv;
            }
        }
        Ok(self.push(Op::LayerNorm { eps }, vec![x], vec![rows, cols], value))
    }

    /// Softmax over the last axis of a 2-d tensor.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "softmax")?;
        let mut value = vec![0.0f32; rows * cols];
        kernel::softmax_rows(&self.nodes[x.0].value, &mut value, rows, cols);
        Ok(self.push(Op::Softmax, vec![x], vec![rows, cols], value))
    }

    /// Rows scaled to unit Euclidean norm; `eps` stabilizes near-zero rows.
    pub fn l2_normalize_rows(&mut self, x: NodeId, eps: f32) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "l2_normalize_rows")?;
        let src = &self.nodes[x.0].value;
        let mut value = vec![0.0f32; rows * cols];
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            let norm = (row.iter().map(|&v| v * v).sum::<f32>() + eps).sqrt();
            for c in 0..cols {
                value[r * cols + c] = row[c] / norm;
            }
        }
        Ok(self.push(
            Op::L2NormalizeRows { eps },
            vec![x],
            vec![rows, cols],
            value,
        ))
    }

    // ── Lookups and losses ───────────────────────────────────────────

    /// Rows of `table` (v x d) gathered by id; backward scatter-adds.
    pub fn embedding_lookup(
        &mut self,
        table: NodeId,
        ids: &[usize],
    ) -> Result<NodeId, TensorError> {
        let (v, d) = self.dims2(table, "embedding_lookup")?;
        for &id in ids {
            if id >= v {
                return Err(TensorError::IndexOutOfRange {
                    op: "embedding_lookup",
                    index: id,
                    bound: v,
                });
            }
        }
        let src = &self.nodes[table.0].value;
        let mut value = vec![0.0f32; ids.len() * d];
        for (row, &id) in ids.iter().enumerate() {
            value[row * d..(row + 1) * d].copy_from_slice(&src[id * d..(id + 1) * d]);
        }
        Ok(self.push(
            Op::EmbeddingLookup { ids: ids.to_vec() },
            vec![table],
            vec![ids.len(), d],
            value,
        ))
    }

    /// Mean over positions of -log softmax(logits)[k][targets[k]].
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
    ) -> Result<NodeId, TensorError> {
        let (rows, v) = self.dims2(logits, "softmax_cross_entropy")?;
        if targets.len() != rows {
            return Err(TensorError::Invalid {
                op: "softmax_cross_entropy",
                msg: format!("{} targets for {} logit rows", targets.len(), rows),
            });
        }
        for &t in targets {
            if t >= v {
                return Err(TensorError::IndexOutOfRange {
                    op: "softmax_cross_entropy",
                    index: t,
                    bound: v,
                });
            }
        }
        let src = &self.nodes[logits.0].value;
        let mut total = 0.0f64;
        for (r, &t) in targets.iter().enumerate() {
            let row = &src[r * v..(r + 1) * v];
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let sum: f64 = row.iter().map(|&x| ((x - max) as f64).exp()).sum();
            total += sum.ln() - (row[t] - max) as f64;
        }
        let value = vec![(total / rows as f64) as f32];
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                targets: targets.to_vec(),
            },
            vec![logits],
            vec![1],
            value,
        ))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let value = vec![self.nodes[x.0].value.iter().sum()];
        self.push(Op::SumAll, vec![x], vec![1], value)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x.0].value.len() as f32;
        let value = vec![self.nodes[x.0].value.iter().sum::<f32>() / n];
        self.push(Op::MeanAll, vec![x], vec![1], value)
    }

    /// Mean of squared differences; the workhorse reconstruction loss.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean_all(sq))
    }

    // ── Shape surgery ────────────────────────────────────────────────

    pub fn slice_cols(
        &mut self,
        x: NodeId,
        start: usize,
        width: usize,
    ) -> Result<NodeId, TensorError> {
        let (rows, cols) = self.dims2(x, "slice_cols")?;
        if start + width > cols {
            return Err(TensorError::IndexOutOfRange {
                op: "slice_cols",
                index: start + width,
                bound: cols,
            });
        }
        let src = &self.nodes[x.0].value;
        let mut value = vec![0.0f32; rows * width];
        for r in 0..rows {
            value[r * width..(r + 1) * width]
                .copy_from_slice(&src[r * cols + start..r * cols + start + width]);
        }
        Ok(self.push(
            Op::SliceCols { start, width },
            vec![x],
            vec![rows, width],
            value,
        ))
    }

    pub fn concat_cols(&mut self, xs: &[NodeId]) -> Result<NodeId, TensorError> {
        if xs.is_empty() {
            return Err(TensorError::Invalid {
                op: "concat_cols",
                msg: "no inputs".into(),
            });
        }
        let (rows, _) = self.dims2(xs[0], "concat_cols")?;
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let (r, c) = self.dims2(x, "concat_cols")?;
            if r != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.shape(xs[0]).to_vec(),
                    rhs: self.shape(x).to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut value = vec![0.0f32; rows * total];
        let mut offset = 0;
        for (&x, &w) in xs.iter().zip(&widths) {
            let src = &self.nodes[x.0].value;
            for r in 0..rows {
                value[r * total + offset..r * total + offset + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        Ok(self.push(Op::ConcatCols, xs.to_vec(), vec![rows, total], value))
    }

    // ── Gradient routing ─────────────────────────────────────────────

    /// Identity on the forward pass; contributes zero gradient upstream.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        let value = self.nodes[x.0].value.clone();
        self.push(Op::Detach, vec![x], shape, value)
    }

    /// Emits `value` on the forward pass; on the backward pass the downstream
    /// gradient is copied to `src` unchanged. Used to route reconstruction
    /// gradients past quantization.
    pub fn straight_through(&mut self, src: NodeId, value: &Tensor) -> Result<NodeId, TensorError> {
        if self.shape(src) != value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "straight_through",
                lhs: self.shape(src).to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        Ok(self.push(
            Op::StraightThrough,
            vec![src],
            value.shape().to_vec(),
            value.data().to_vec(),
        ))
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Gradients of parameter leaves
    /// are accumulated into the corresponding [`ParamSet`] entries.
    pub fn backward(&mut self, loss: NodeId, params: &mut ParamSet) -> Result<(), TensorError> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: self.nodes[loss.0].shape.clone(),
            });
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(d_out) = grads[idx].take() else {
                continue;
            };
            // Route parameter-leaf gradients out to the ParamSet.
            if let Op::Leaf { param } = &self.nodes[idx].op {
                if let Some(pid) = *param {
                    if params.get(pid).requires_grad() {
                        params.get_mut(pid).accumulate_grad(&d_out);
                    }
                }
                continue;
            }
            self.backward_op(idx, &d_out, &mut grads);
        }
        Ok(())
    }

    /// Gradient of node `idx` w.r.t. its inputs, given upstream `d_out`.
    fn backward_op(&self, idx: usize, d_out: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let node = &self.nodes[idx];
        let acc = |grads: &mut [Option<Vec<f32>>], target: NodeId, contrib: Vec<f32>| {
            match &mut grads[target.0] {
                Some(existing) => {
                    for (e, v) in existing.iter_mut().zip(&contrib) {
                        *e += v;
                    }
                }
                slot => *slot = Some(contrib),
            }
        };

        match &node.op {
            Op::Leaf { .. } => {}
            Op::Add => {
                acc(grads, node.inputs[0], d_out.to_vec());
                acc(grads, node.inputs[1], d_out.to_vec());
            }
            Op::Sub => {
                acc(grads, node.inputs[0], d_out.to_vec());
                acc(grads, node.inputs[1], d_out.iter().map(|&v| -v).collect());
            }
            Op::Mul => {
                let a = &self.nodes[node.inputs[0].0].value;
                let b = &self.nodes[node.inputs[1].0].value;
                acc(
                    grads,
                    node.inputs[0],
                    d_out.iter().zip(b).map(|(&d, &v)| d * v).collect(),
                );
                acc(
                    grads,
                    node.inputs[1],
                    d_out.iter().zip(a).map(|(&d, &v)| d * v).collect(),
                );
            }
            Op::Scale(c) => {
                acc(grads, node.inputs[0], d_out.iter().map(|&v| v * c).collect());
            }
            Op::AddRow => {
                let cols = node.shape[1];
                acc(grads, node.inputs[0], d_out.to_vec());
                let mut db = vec![0.0f32; cols];
                for (i, &d) in d_out.iter().enumerate() {
                    db[i % cols] += d;
                }
                acc(grads, node.inputs[1], db);
            }
            Op::MulRow => {
                let (rows, cols) = (node.shape[0], node.shape[1]);
                let x = &self.nodes[node.inputs[0].0].value;
                let g = &self.nodes[node.inputs[1].0].value;
                let mut dx = vec![0.0f32; rows * cols];
                let mut dg = vec![0.0f32; cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let i = r * cols + c;
                        dx[i] = d_out[i] * g[c];
                        dg[c] += d_out[i] * x[i];
                    }
                }
                acc(grads, node.inputs[0], dx);
                acc(grads, node.inputs[1], dg);
            }
            Op::AddChan => {
                let (chans, n) = (node.shape[0], node.shape[1]);
                acc(grads, node.inputs[0], d_out.to_vec());
                let mut db = vec![0.0f32; chans];
                for c in 0..chans {
                    db[c] = d_out[c * n..(c + 1) * n].iter().sum();
                }
                acc(grads, node.inputs[1], db);
            }
            Op::MatMul => {
                let a_id = node.inputs[0];
                let b_id = node.inputs[1];
                let (m, k) = (self.nodes[a_id.0].shape[0], self.nodes[a_id.0].shape[1]);
                let n = self.nodes[b_id.0].shape[1];
                // dA = dOut * B^T
                let mut bt = vec![0.0f32; k * n];
                kernel::transpose(&self.nodes[b_id.0].value, &mut bt, k, n);
                let mut da = vec![0.0f32; m * k];
                kernel::matmul(d_out, &bt, &mut da, m, n, k);
                acc(grads, a_id, da);
                // dB = A^T * dOut
                let mut at = vec![0.0f32; m * k];
                kernel::transpose(&self.nodes[a_id.0].value, &mut at, m, k);
                let mut db = vec![0.0f32; k * n];
                kernel::matmul(&at, d_out, &mut db, k, m, n);
                acc(grads, b_id, db);
            }
            Op::Transpose => {
                let (rows, cols) = (node.shape[0], node.shape[1]);
                let mut dx = vec![0.0f32; rows * cols];
                kernel::transpose(d_out, &mut dx, rows, cols);
                acc(grads, node.inputs[0], dx);
            }
            Op::Conv1d { stride, pad } => {
                let x_id = node.inputs[0];
                let w_id = node.inputs[1];
                let (c_in, n) = (self.nodes[x_id.0].shape[0], self.nodes[x_id.0].shape[1]);
                let ws = &self.nodes[w_id.0].shape;
                let (c_out, kw) = (ws[0], ws[2]);
                let mut dx = vec![0.0f32; c_in * n];
                kernel::conv1d_backward_input(
                    d_out,
                    &self.nodes[w_id.0].value,
                    &mut dx,
                    c_in,
                    n,
                    c_out,
                    kw,
                    *stride,
                    *pad,
                );
                acc(grads, x_id, dx);
                let mut dw = vec![0.0f32; c_out * c_in * kw];
                kernel::conv1d_backward_kernel(
                    d_out,
                    &self.nodes[x_id.0].value,
                    &mut dw,
                    c_in,
                    n,
                    c_out,
                    kw,
                    *stride,
                    *pad,
                );
                acc(grads, w_id, dw);
            }
            Op::UpsampleNearest { factor } => {
                let (chans, n_out) = (node.shape[0], node.shape[1]);
                let n_in = n_out / factor;
                let mut dx = vec![0.0f32; chans * n_in];
                for c in 0..chans {
                    for t in 0..n_out {
                        dx[c * n_in + t / factor] += d_out[c * n_out + t];
                    }
                }
                acc(grads, node.inputs[0], dx);
            }
            Op::Relu => {
                let x = &self.nodes[node.inputs[0].0].value;
                acc(
                    grads,
                    node.inputs[0],
                    d_out
                        .iter()
                        .zip(x)
                        .map(|(&d, &v)| if v > 0.0 { d } else { 0.0 })
                        .collect(),
                );
            }
            Op::LayerNorm { eps } => {
                let (rows, cols) = (node.shape[0], node.shape[1]);
                let x = &self.nodes[node.inputs[0].0].value;
                let y = &node.value;
                let mut dx = vec![0.0f32; rows * cols];
                for r in 0..rows {
                    let xr = &x[r * cols..(r + 1) * cols];
                    let yr = &y[r * cols..(r + 1) * cols];
                    let dr = &d_out[r * cols..(r + 1) * cols];
                    let mean = xr.iter().sum::<f32>() / cols as f32;
                    let var =
                        xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / cols as f32;
                    let inv = 1.0 / (var + eps).sqrt();
                    let mean_d = dr.iter().sum::<f32>() / cols as f32;
                    let mean_dy =
                        dr.iter().zip(yr).map(|(&d, &v)| d * v).sum::<f32>() / cols as f32;
                    for c in 0..cols {
                        dx[r * cols + c] = inv * (dr[c] - mean_d - yr[c] * mean_dy);
                    }
                }
                acc(grads, node.inputs[0], dx);
            }
            Op::Softmax => {
                let (rows, cols) = (node.shape[0], node.shape[1]);
                let y = &node.value;
                let mut dx = vec![0.0f32; rows * cols];
                for r in 0..rows {
                    let yr = &y[r * cols..(r + 1) * cols];
                    let dr = &d_out[r * cols..(r + 1) * cols];
                    let dot: f32 = yr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
                    for c in 0..cols {
                        dx[r * cols + c] = yr[c] * (dr[c] - dot);
                    }
                }
                acc(grads, node.inputs[0], dx);
            }
            Op::L2NormalizeRows { eps } => {
                let (rows, cols) = (node.shape[0], node.shape[1]);
                let x = &self.nodes[node.inputs[0].0].value;
                let y = &node.value;
                let mut dx = vec![0.0f32; rows * cols];
                for r in 0..rows {
                    let xr = &x[r * cols..(r + 1) * cols];
                    let yr = &y[r * cols..(r + 1) * cols];
                    let dr = &d_out[r * cols..(r + 1) * cols];
                    let norm = (xr.iter().map(|&v| v * v).sum::<f32>() + eps).sqrt();
                    let dot: f32 = yr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
                    for c in 0..cols {
                        dx[r * cols + c] = (dr[c] - yr[c] * dot) / norm;
                    }
                }
                acc(grads, node.inputs[0], dx);
            }
            Op::EmbeddingLookup { ids } => {
                let d = node.shape[1];
                let table_shape = &self.nodes[node.inputs[0].0].shape;
                let mut dt = vec![0.0f32; table_shape[0] * table_shape[1]];
                for (row, &id) in ids.iter().enumerate() {
                    for c in 0..d {
                        dt[id * d + c] += d_out[row * d + c];
                    }
                }
                acc(grads, node.inputs[0], dt);
            }
            Op::SoftmaxCrossEntropy { targets } => {
                let logits = &self.nodes[node.inputs[0].0].value;
                let rows = targets.len();
                let v = self.nodes[node.inputs[0].0].shape[1];
                let scale = d_out[0] / rows as f32;
                let mut dl = vec![0.0f32; rows * v];
                kernel::softmax_rows(logits, &mut dl, rows, v);
                for (r, &t) in targets.iter().enumerate() {
                    dl[r * v + t] -= 1.0;
                }
                for g in dl.iter_mut() {
                    *g *= scale;
                }
                acc(grads, node.inputs[0], dl);
            }
            Op::SumAll => {
                let n = self.nodes[node.inputs[0].0].value.len();
                acc(grads, node.inputs[0], vec![d_out[0]; n]);
            }
            Op::MeanAll => {
                let n = self.nodes[node.inputs[0].0].value.len();
                acc(grads, node.inputs[0], vec![d_out[0] / n as f32; n]);
            }
            Op::SliceCols { start, width } => {
                let rows = node.shape[0];
                let cols = self.nodes[node.inputs[0].0].shape[1];
                let mut dx = vec![0.0f32; rows * cols];
                for r in 0..rows {
                    dx[r * cols + start..r * cols + start + width]
                        .copy_from_slice(&d_out[r * width..(r + 1) * width]);
                }
                acc(grads, node.inputs[0], dx);
            }
            Op::ConcatCols => {
                let rows = node.shape[0];
                let total = node.shape[1];
                let mut offset = 0;
                for &input in &node.inputs {
                    let w = self.nodes[input.0].shape[1];
                    let mut dx = vec![0.0f32; rows * w];
                    for r in 0..rows {
                        dx[r * w..(r + 1) * w]
                            .copy_from_slice(&d_out[r * total + offset..r * total + offset + w]);
                    }
                    acc(grads, input, dx);
                    offset += w;
                }
            }
            Op::Detach => {
                // Gradient stops here.
            }
            Op::StraightThrough => {
                acc(grads, node.inputs[0], d_out.to_vec());
            }
        }
    }
}
