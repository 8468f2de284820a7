use super::dense::DenseMatrix;
use super::{ParamId, ParamStore};
use crate::error::{CoreError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// A constant sparse block (rows of a normalized adjacency restricted to a
/// computation cone). The sparse weights are data, not parameters, so only
/// the dense operand receives a gradient.
#[derive(Debug, Clone)]
pub struct AdjSlice {
    pub out_rows: usize,
    pub in_rows: usize,
    pub row_offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl AdjSlice {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// `self · input`; per-row accumulation in stored column order.
    fn apply(&self, input: &DenseMatrix) -> DenseMatrix {
        let c = input.cols();
        let mut out = DenseMatrix::zeros(self.out_rows, c);
        for i in 0..self.out_rows {
            let orow = out.row_mut(i);
            for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                let src = input.row(self.cols[e]);
                let w = self.vals[e];
                for j in 0..c {
                    orow[j] += w * src[j];
                }
            }
        }
        out
    }

    /// `selfᵀ · grad`; iterates rows in order so the scatter is deterministic.
    fn apply_transpose(&self, grad: &DenseMatrix) -> DenseMatrix {
        let c = grad.cols();
        let mut out = DenseMatrix::zeros(self.in_rows, c);
        for i in 0..self.out_rows {
            let grow = grad.row(i);
            for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                let w = self.vals[e];
                let orow = out.row_mut(self.cols[e]);
                for j in 0..c {
                    orow[j] += w * grow[j];
                }
            }
        }
        out
    }
}

/// Forward-pass work recorded while taping, drained into the epoch counters.
#[derive(Debug, Clone, Copy, Default)]
pub struct TapeFlops {
    pub dense: u64,
    pub spmm: u64,
}

enum Recorded {
    Leaf {
        param: Option<ParamId>,
    },
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Relu {
        input: NodeId,
    },
    Hadamard {
        a: NodeId,
        b: NodeId,
    },
    GatherRows {
        src: NodeId,
        index: Vec<usize>,
    },
    SpmmConst {
        adj: AdjSlice,
        input: NodeId,
    },
    RowSum {
        input: NodeId,
    },
    AddRowVec {
        input: NodeId,
        bias: NodeId,
    },
    BatchNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: DenseMatrix,
        inv_std: Vec<f64>,
        training: bool,
    },
    BceLogitsMean {
        scores: NodeId,
        labels: Vec<f64>,
    },
}

struct Node {
    value: DenseMatrix,
    grad: DenseMatrix,
    op: Recorded,
}

/// Records matrix operations in execution order; `backward` replays them in
/// exact reverse, accumulating gradients additively into leaf parameters.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    pub flops: TapeFlops,
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].grad
    }

    fn push(&mut self, value: DenseMatrix, op: Recorded) -> NodeId {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node { value, grad, op });
        NodeId(self.nodes.len() - 1)
    }

    /// A value with no gradient flow into it (inputs, pre-encoded features).
    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push(value, Recorded::Leaf { param: None })
    }

    /// A leaf bound to a stored parameter; `backward` accumulates into its grad.
    pub fn param(&mut self, id: ParamId, store: &ParamStore) -> NodeId {
        self.push(store.value(id).clone(), Recorded::Leaf { param: Some(id) })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (am, bm) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if am.cols() != bm.rows() {
            return Err(CoreError::ShapeMismatch {
                context: "matmul",
                got_rows: bm.rows(),
                got_cols: bm.cols(),
                want_rows: am.cols(),
                want_cols: bm.cols(),
            });
        }
        self.flops.dense += (am.rows() * am.cols() * bm.cols()) as u64;
        let value = am.matmul(bm);
        Ok(self.push(value, Recorded::MatMul { a, b }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (am, bm) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if !am.same_shape(bm) {
            return Err(CoreError::ShapeMismatch {
                context: "add",
                got_rows: bm.rows(),
                got_cols: bm.cols(),
                want_rows: am.rows(),
                want_cols: am.cols(),
            });
        }
        let value = am.add(bm);
        Ok(self.push(value, Recorded::Add { a, b }))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let x = &self.nodes[input.0].value;
        let mut value = x.clone();
        for v in value.data_mut() {
            if !(*v > 0.0) {
                *v = 0.0;
            }
        }
        self.push(value, Recorded::Relu { input })
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (am, bm) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if !am.same_shape(bm) {
            return Err(CoreError::ShapeMismatch {
                context: "hadamard",
                got_rows: bm.rows(),
                got_cols: bm.cols(),
                want_rows: am.rows(),
                want_cols: am.cols(),
            });
        }
        let value = am.hadamard(bm);
        Ok(self.push(value, Recorded::Hadamard { a, b }))
    }

    pub fn gather_rows(&mut self, src: NodeId, index: &[usize]) -> Result<NodeId> {
        let s = &self.nodes[src.0].value;
        for &i in index {
            if i >= s.rows() {
                return Err(CoreError::NodeOutOfRange {
                    id: i as u64,
                    num_nodes: s.rows(),
                });
            }
        }
        let value = s.gather_rows(index);
        Ok(self.push(
            value,
            Recorded::GatherRows {
                src,
                index: index.to_vec(),
            },
        ))
    }

    pub fn spmm(&mut self, adj: AdjSlice, input: NodeId) -> Result<NodeId> {
        let x = &self.nodes[input.0].value;
        if adj.in_rows != x.rows() {
            return Err(CoreError::ShapeMismatch {
                context: "spmm",
                got_rows: x.rows(),
                got_cols: x.cols(),
                want_rows: adj.in_rows,
                want_cols: x.cols(),
            });
        }
        self.flops.spmm += (adj.nnz() * x.cols()) as u64;
        let value = adj.apply(x);
        Ok(self.push(value, Recorded::SpmmConst { adj, input }))
    }

    pub fn row_sum(&mut self, input: NodeId) -> NodeId {
        let x = &self.nodes[input.0].value;
        let mut value = DenseMatrix::zeros(x.rows(), 1);
        for i in 0..x.rows() {
            value.set(i, 0, x.row(i).iter().sum());
        }
        self.push(value, Recorded::RowSum { input })
    }

    /// Broadcast-adds a 1×c bias row to every row of `input`.
    pub fn add_row_vec(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, b) = (&self.nodes[input.0].value, &self.nodes[bias.0].value);
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(CoreError::ShapeMismatch {
                context: "add_row_vec",
                got_rows: b.rows(),
                got_cols: b.cols(),
                want_rows: 1,
                want_cols: x.cols(),
            });
        }
        let mut value = x.clone();
        let brow: Vec<f64> = b.row(0).to_vec();
        for i in 0..value.rows() {
            for (v, bv) in value.row_mut(i).iter_mut().zip(&brow) {
                *v += bv;
            }
        }
        Ok(self.push(value, Recorded::AddRowVec { input, bias }))
    }

    /// Per-column standardization with learned affine. In training mode the
    /// batch statistics are used (and returned for the running-stat update);
    /// in inference mode the caller passes the running statistics.
    pub fn batch_norm(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        stats: &[(f64, f64)],
        eps: f64,
        training: bool,
    ) -> Result<NodeId> {
        let x = self.nodes[input.0].value.clone();
        let g = &self.nodes[gamma.0].value;
        let b = &self.nodes[beta.0].value;
        g.check_shape(1, x.cols(), "batch_norm gamma")?;
        b.check_shape(1, x.cols(), "batch_norm beta")?;
        if stats.len() != x.cols() {
            return Err(CoreError::InvalidConfig(
                "batch_norm stats length != columns".into(),
            ));
        }
        if training && x.rows() < 2 {
            return Err(CoreError::BatchTooSmall { rows: x.rows() });
        }
        let cols = x.cols();
        let mut inv_std = vec![0.0; cols];
        for (j, &(_, var)) in stats.iter().enumerate() {
            inv_std[j] = 1.0 / (var + eps).sqrt();
        }
        let mut xhat = DenseMatrix::zeros(x.rows(), cols);
        let mut value = DenseMatrix::zeros(x.rows(), cols);
        for i in 0..x.rows() {
            for j in 0..cols {
                let h = (x.get(i, j) - stats[j].0) * inv_std[j];
                xhat.set(i, j, h);
                value.set(i, j, g.get(0, j) * h + b.get(0, j));
            }
        }
        Ok(self.push(
            value,
            Recorded::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                training,
            },
        ))
    }

    /// Mean binary cross-entropy with logits over a B×1 score column.
    pub fn bce_with_logits_mean(&mut self, scores: NodeId, labels: &[f64]) -> Result<NodeId> {
        let s = &self.nodes[scores.0].value;
        s.check_shape(labels.len(), 1, "bce_with_logits_mean scores")?;
        if labels.is_empty() {
            return Err(CoreError::InvalidConfig("empty batch in loss".into()));
        }
        let mut acc = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let sv = s.get(i, 0);
            acc += softplus(sv) - y * sv;
        }
        let value = DenseMatrix::from_vec(1, 1, vec![acc / labels.len() as f64]);
        Ok(self.push(
            value,
            Recorded::BceLogitsMean {
                scores,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar root. Node gradients are reset first, so
    /// separate calls on the same tape accumulate independently into the
    /// parameter store.
    pub fn backward(&mut self, root: NodeId, store: &mut ParamStore) -> Result<()> {
        {
            let r = &self.nodes[root.0].value;
            r.check_shape(1, 1, "backward root")?;
        }
        for node in &mut self.nodes {
            node.grad.fill(0.0);
        }
        self.nodes[root.0].grad.set(0, 0, 1.0);

        for i in (0..=root.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            match &node.op {
                Recorded::Leaf { param } => {
                    if let Some(p) = param {
                        store.get_mut(*p).grad.add_assign(&node.grad);
                    }
                }
                Recorded::MatMul { a, b } => {
                    let da = node.grad.matmul_transpose_other(&before[b.0].value);
                    let db = before[a.0].value.matmul_transpose_self(&node.grad);
                    before[a.0].grad.add_assign(&da);
                    before[b.0].grad.add_assign(&db);
                }
                Recorded::Add { a, b } => {
                    let g = node.grad.clone();
                    before[a.0].grad.add_assign(&g);
                    before[b.0].grad.add_assign(&g);
                }
                Recorded::Relu { input } => {
                    let x = &before[input.0].value;
                    let mut dx = node.grad.clone();
                    for (d, xv) in dx.data_mut().iter_mut().zip(x.data()) {
                        if !(*xv > 0.0) {
                            *d = 0.0;
                        }
                    }
                    before[input.0].grad.add_assign(&dx);
                }
                Recorded::Hadamard { a, b } => {
                    let da = node.grad.hadamard(&before[b.0].value);
                    let db = node.grad.hadamard(&before[a.0].value);
                    before[a.0].grad.add_assign(&da);
                    before[b.0].grad.add_assign(&db);
                }
                Recorded::GatherRows { src, index } => {
                    let grad = &node.grad;
                    let dst = &mut before[src.0].grad;
                    for (i, &s) in index.iter().enumerate() {
                        let grow = grad.row(i);
                        for (d, g) in dst.row_mut(s).iter_mut().zip(grow) {
                            *d += g;
                        }
                    }
                }
                Recorded::SpmmConst { adj, input } => {
                    let dx = adj.apply_transpose(&node.grad);
                    before[input.0].grad.add_assign(&dx);
                }
                Recorded::RowSum { input } => {
                    let grad = &node.grad;
                    let dst = &mut before[input.0].grad;
                    for i in 0..dst.rows() {
                        let g = grad.get(i, 0);
                        for d in dst.row_mut(i) {
                            *d += g;
                        }
                    }
                }
                Recorded::AddRowVec { input, bias } => {
                    let g = node.grad.clone();
                    before[input.0].grad.add_assign(&g);
                    let db = &mut before[bias.0].grad;
                    for i in 0..g.rows() {
                        for (d, gv) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                            *d += gv;
                        }
                    }
                }
                Recorded::BatchNorm {
                    input,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    training,
                } => {
                    let g = &node.grad;
                    let rows = g.rows();
                    let cols = g.cols();
                    let mut dbeta = vec![0.0; cols];
                    let mut dgamma = vec![0.0; cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            dbeta[j] += g.get(i, j);
                            dgamma[j] += g.get(i, j) * xhat.get(i, j);
                        }
                    }
                    let gamma_val = before[gamma.0].value.clone();
                    let mut dx = DenseMatrix::zeros(rows, cols);
                    let inv_b = 1.0 / rows as f64;
                    for i in 0..rows {
                        for j in 0..cols {
                            let scale = gamma_val.get(0, j) * inv_std[j];
                            let centered = if *training {
                                g.get(i, j)
                                    - dbeta[j] * inv_b
                                    - xhat.get(i, j) * dgamma[j] * inv_b
                            } else {
                                g.get(i, j)
                            };
                            dx.set(i, j, scale * centered);
                        }
                    }
                    before[input.0].grad.add_assign(&dx);
                    for j in 0..cols {
                        let gg = &mut before[gamma.0].grad;
                        gg.set(0, j, gg.get(0, j) + dgamma[j]);
                        let gb = &mut before[beta.0].grad;
                        gb.set(0, j, gb.get(0, j) + dbeta[j]);
                    }
                }
                Recorded::BceLogitsMean { scores, labels } => {
                    let g = node.grad.get(0, 0);
                    let inv_b = 1.0 / labels.len() as f64;
                    let sv = before[scores.0].value.clone();
                    let ds = &mut before[scores.0].grad;
                    for (i, &y) in labels.iter().enumerate() {
                        let d = g * (sigmoid(sv.get(i, 0)) - y) * inv_b;
                        ds.set(i, 0, ds.get(i, 0) + d);
                    }
                }
            }
        }
        Ok(())
    }
}
