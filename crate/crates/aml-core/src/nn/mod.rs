//! Dense linear algebra with matrix-granular reverse-mode gradients.
//!
//! Only the operations the model needs are implemented: affine products,
//! elementwise activation and multiplication, per-branch batch
//! normalization, row gathers, constant-sparse products, and the logistic
//! loss. Everything runs in f64 with a fixed summation order so results are
//! reproducible bit for bit.

mod adam;
mod dense;
mod gradcheck;
mod norm;
mod tape;

pub use adam::{adam_step, AdamConfig};
pub use dense::DenseMatrix;
pub use gradcheck::grad_check;
pub use norm::{BranchNorm, BranchTag};
pub use tape::{AdjSlice, NodeId, Tape, TapeFlops};

use crate::error::{CoreError, Result};

/// A learnable matrix together with its gradient and Adam state.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    pub adam_m: DenseMatrix,
    pub adam_v: DenseMatrix,
    pub step_count: u64,
    /// Buffers (e.g. running norm statistics) live in the store for
    /// checkpointing but are never touched by the optimizer.
    pub trainable: bool,
}

impl ParamTensor {
    pub fn new(value: DenseMatrix, trainable: bool) -> Self {
        let (r, c) = (value.rows(), value.cols());
        ParamTensor {
            value,
            grad: DenseMatrix::zeros(r, c),
            adam_m: DenseMatrix::zeros(r, c),
            adam_v: DenseMatrix::zeros(r, c),
            step_count: 0,
            trainable,
        }
    }
}

/// Identifies one parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Owns every parameter of one training context.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: DenseMatrix, trainable: bool) -> ParamId {
        let name = name.into();
        debug_assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.tensors.push(ParamTensor::new(value, trainable));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor {
        &mut self.tensors[id.0]
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.tensors[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamTensor)> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), t))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.grad.fill(0.0);
        }
    }

    /// Sum of squared Frobenius norms over trainable parameters (the
    /// regularization penalty value, reported in logs).
    pub fn frobenius_penalty(&self) -> f64 {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .map(|t| t.value.frobenius_sq())
            .sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Copies all values (and buffers) out for later restoration.
    pub fn snapshot_values(&self) -> Vec<DenseMatrix> {
        self.tensors.iter().map(|t| t.value.clone()).collect()
    }

    pub fn restore_values(&mut self, snapshot: &[DenseMatrix]) -> Result<()> {
        if snapshot.len() != self.tensors.len() {
            return Err(CoreError::InvalidConfig(format!(
                "snapshot has {} tensors, store has {}",
                snapshot.len(),
                self.tensors.len()
            )));
        }
        for (t, v) in self.tensors.iter_mut().zip(snapshot) {
            t.value = v.clone();
        }
        Ok(())
    }
}
