//! Dense f32 tensor kernel with define-by-run reverse-mode differentiation.
//!
//! The kernel is deliberately small: row-major [`Tensor`] buffers, a
//! [`Graph`] that records operations as they execute and replays them in
//! reverse for gradients, and an [`AdamState`] optimizer. Training state is
//! 32-bit throughout; test oracles re-derive forward values in 64-bit.
//!
//! Stop-gradient semantics: [`Graph::detach`] blocks gradient flow entirely,
//! [`Graph::straight_through`] substitutes a value on the forward pass while
//! copying the downstream gradient to its source unchanged.

mod adam;
mod checkpoint;
mod graph;
pub(crate) mod kernel;

pub use adam::AdamState;
pub use checkpoint::{load_into, load_tensors, save_tensors, CheckpointError};
pub use graph::{Graph, NodeId};

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Errors raised by tensor construction and graph operations.
#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected a scalar, got shape {shape:?}")]
    NotScalar { op: &'static str, shape: Vec<usize> },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

/// A dense row-major f32 tensor.
///
/// `grad`, when present, always has the same number of elements as `data`;
/// it is populated by [`Graph::backward`] for tensors with
/// `requires_grad == true`.
#[derive(Debug, Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    requires_grad: bool,
    grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::Invalid {
                op: "from_vec",
                msg: format!("shape {:?} needs {} elements, got {}", shape, numel, data.len()),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(v: f32) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
            requires_grad: false,
            grad: None,
        }
    }

    /// Gaussian init with the given standard deviation.
    pub fn randn<R: Rng>(shape: Vec<usize>, std: f32, rng: &mut R) -> Self {
        let numel: usize = shape.iter().product();
        let normal = Normal::new(0.0f32, std).expect("std must be finite");
        let data = (0..numel).map(|_| normal.sample(rng)).collect();
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    /// Marks the tensor as trainable and allocates its gradient buffer.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.fill(0.0);
        }
    }

    pub(crate) fn accumulate_grad(&mut self, g: &[f32]) {
        debug_assert_eq!(g.len(), self.data.len());
        let buf = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (b, v) in buf.iter_mut().zip(g) {
            *b += v;
        }
    }
}

/// Identifier of a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named collection of trainable tensors owned by a model.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let id = ParamId(self.entries.len());
        self.entries.push((name.into(), tensor.with_grad()));
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn zero_grads(&mut self) {
        for (_, t) in &mut self.entries {
            t.zero_grad();
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }
}
