use super::dense::DenseMatrix;
use super::tape::{NodeId, Tape};
use super::{ParamId, ParamStore};
use crate::error::Result;

/// Which representation branch a norm belongs to. Head and tail branches
/// keep individual parameters even when the surrounding layers share weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchTag {
    Head,
    Tail,
}

impl BranchTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchTag::Head => "head",
            BranchTag::Tail => "tail",
        }
    }
}

/// Per-branch batch normalization: learned gamma/beta plus running
/// statistics kept as non-trainable buffers so checkpoints restore inference
/// behavior exactly.
#[derive(Debug, Clone)]
pub struct BranchNorm {
    pub branch: BranchTag,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl BranchNorm {
    pub fn create(store: &mut ParamStore, prefix: &str, branch: BranchTag, dim: usize) -> Self {
        let ones = DenseMatrix::from_vec(1, dim, vec![1.0; dim]);
        let zeros = DenseMatrix::zeros(1, dim);
        BranchNorm {
            branch,
            gamma: store.add(format!("{prefix}.gamma"), ones.clone(), true),
            beta: store.add(format!("{prefix}.beta"), zeros.clone(), true),
            running_mean: store.add(format!("{prefix}.running_mean"), zeros, false),
            running_var: store.add(format!("{prefix}.running_var"), ones, false),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    /// Normalizes `x` column-wise. Training mode standardizes with batch
    /// statistics and folds them into the running buffers; inference mode
    /// uses the running statistics and leaves them untouched.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &mut ParamStore,
        x: NodeId,
        training: bool,
    ) -> Result<NodeId> {
        let cols = tape.value(x).cols();
        let stats: Vec<(f64, f64)> = if training {
            let m = tape.value(x);
            let rows = m.rows();
            let mut out = Vec::with_capacity(cols);
            for j in 0..cols {
                let mut mean = 0.0;
                for i in 0..rows {
                    mean += m.get(i, j);
                }
                mean /= rows as f64;
                let mut var = 0.0;
                for i in 0..rows {
                    let d = m.get(i, j) - mean;
                    var += d * d;
                }
                var /= rows as f64;
                out.push((mean, var));
            }
            out
        } else {
            let rm = store.value(self.running_mean);
            let rv = store.value(self.running_var);
            (0..cols).map(|j| (rm.get(0, j), rv.get(0, j))).collect()
        };

        if training {
            let rows = tape.value(x).rows() as f64;
            // unbiased variance goes into the running buffer, as is standard
            let correction = if rows > 1.0 { rows / (rows - 1.0) } else { 1.0 };
            let mom = self.momentum;
            for j in 0..cols {
                let (mean, var) = stats[j];
                let rm = store.get_mut(self.running_mean);
                let old = rm.value.get(0, j);
                rm.value.set(0, j, (1.0 - mom) * old + mom * mean);
                let rv = store.get_mut(self.running_var);
                let old = rv.value.get(0, j);
                rv.value.set(0, j, (1.0 - mom) * old + mom * var * correction);
            }
        }

        let gamma = tape.param(self.gamma, store);
        let beta = tape.param(self.beta, store);
        tape.batch_norm(x, gamma, beta, &stats, self.eps, training)
    }
}
