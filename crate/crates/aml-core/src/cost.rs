//! Empirical computation accounting.
//!
//! Counters tally node-representation evaluations rather than wall-clock:
//! `gnn_node_computations` counts message-passing output evaluations,
//! `mlp_node_computations` counts tail-path evaluations, and
//! `gnn_cone_nodes` additionally weights each message-passing batch by its
//! expanded computation-cone size. Flop counters come from the tape.

/// Per-epoch tallies; thread-confined, reset only at epoch boundaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostCounters {
    pub gnn_node_computations: u64,
    pub mlp_node_computations: u64,
    pub gnn_cone_nodes: u64,
    pub spmm_flops: u64,
    pub dense_flops: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum CostEvent {
    GnnNode,
    MlpNode,
    GnnCone,
    Spmm,
    Dense,
}

impl CostCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: CostEvent, magnitude: u64) {
        match event {
            CostEvent::GnnNode => self.gnn_node_computations += magnitude,
            CostEvent::MlpNode => self.mlp_node_computations += magnitude,
            CostEvent::GnnCone => self.gnn_cone_nodes += magnitude,
            CostEvent::Spmm => self.spmm_flops += magnitude,
            CostEvent::Dense => self.dense_flops += magnitude,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Graph statistics feeding the closed-form per-epoch cost predictions.
#[derive(Debug, Clone, Copy)]
pub struct CostStats {
    pub num_nodes: f64,
    pub num_edges: f64,
    /// Average neighbor count per node.
    pub avg_neighbors: f64,
    pub layers: f64,
    pub hidden_dim: f64,
    /// Subgraph hop count, used by the local-method formulas only.
    pub hops: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMethod {
    LocalGnnLp,
    LocalGnnLpRowWise,
    GlobalGnnLp,
    GlobalGnnLpRowWise,
    AmlEdgeWise,
    AmlRowWise,
}

/// Closed-form per-epoch cost (no hidden constants), for ratio comparisons.
pub fn predict_epoch_cost(stats: CostStats, method: CostMethod) -> f64 {
    let CostStats {
        num_nodes: n,
        num_edges: e,
        avg_neighbors: s,
        layers: l,
        hidden_dim: r,
        hops: k,
    } = stats;
    let r2 = r * r;
    match method {
        CostMethod::LocalGnnLp | CostMethod::LocalGnnLpRowWise => 2.0 * l * s.powf(k) * r2 * e,
        CostMethod::GlobalGnnLp => 2.0 * s.powf(l) * r2 * e,
        CostMethod::GlobalGnnLpRowWise => s.powf(l) * r2 * (e + n),
        CostMethod::AmlEdgeWise => (s.powf(l) * r2 + l * r2) * e,
        CostMethod::AmlRowWise => s.powf(l) * r2 * n + l * r2 * e,
    }
}
