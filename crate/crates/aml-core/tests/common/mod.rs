//! Shared fixtures for integration tests.
#![allow(dead_code)]

use aml_core::cost::CostCounters;
use aml_core::graph::CsrGraph;
use aml_core::model::{forward_batch, prepare_model_data, ModelConfig, ModelParams};
use aml_core::nn::{grad_check, DenseMatrix, ParamStore, Tape};
use aml_core::seed;

/// Brute-force ranking oracle: a positive is a hit at K iff fewer than K
/// negatives score at or above it.
pub fn hits_oracle(pos: &[f64], neg: &[f64], k: usize) -> f64 {
    if k > neg.len() {
        return 1.0;
    }
    let hits = pos
        .iter()
        .filter(|&&p| neg.iter().filter(|&&n| n >= p).count() < k)
        .count();
    hits as f64 / pos.len() as f64
}

/// Brute-force reciprocal rank by sorting the full candidate list with the
/// positive losing ties.
pub fn mrr_oracle(pos: f64, negs: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = negs.iter().map(|&n| (n, false)).collect();
    all.push((pos, true));
    all.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        std::cmp::Ordering::Equal => a.1.cmp(&b.1),
        other => other,
    });
    let rank = all.iter().position(|&(_, is_pos)| is_pos).unwrap() + 1;
    1.0 / rank as f64
}

/// A small digraph with cycles, a hub, and one isolated-ish node.
pub fn tiny_graph6() -> CsrGraph {
    CsrGraph::from_edges(
        6,
        &[
            (0, 1),
            (1, 2),
            (2, 0),
            (2, 3),
            (3, 4),
            (4, 2),
            (4, 5),
            (5, 4),
            (0, 4),
        ],
    )
    .unwrap()
}

/// Deterministic quasi-random features in roughly [-1.5, 1.5].
pub fn det_features(rows: usize, cols: usize, salt: usize) -> DenseMatrix {
    let mut x = DenseMatrix::zeros(rows, cols);
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        *v = (((i * 37 + salt * 101 + 13) % 61) as f64) / 20.0 - 1.5;
    }
    x
}

pub const GRAD_PAIRS: [(u32, u32); 7] = [
    (0, 2),
    (1, 4),
    (2, 5),
    (3, 0),
    (4, 4),
    (5, 1),
    (0, 3),
];
pub const GRAD_LABELS: [f64; 7] = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];

/// End-to-end maximum relative gradient error for one configuration on the
/// 6-node fixture: one backward pass against central finite differences
/// (h = 1e-5) on up to 500 sampled coordinates.
pub fn e2e_grad_error(cfg: &ModelConfig, seed_root: u64) -> f64 {
    let graph = tiny_graph6();
    let x = det_features(6, cfg.hidden_dim.max(3), 5);
    let data = prepare_model_data(&graph, x, cfg, None).expect("prepare");

    let mut store = ParamStore::new();
    let mut init_rng = seed::stream(seed_root, "init", 0);
    let params = ModelParams::init(&mut store, cfg, data.features.cols(), &mut init_rng)
        .expect("init");

    let loss_only = |store: &mut ParamStore, do_backward: bool| -> f64 {
        let mut tape = Tape::new();
        let mut counters = CostCounters::new();
        let mut rng = seed::stream(seed_root, "fanout", 0);
        let scores = forward_batch(
            &mut tape,
            store,
            &mut counters,
            cfg,
            &params,
            &data,
            &GRAD_PAIRS,
            None,
            &mut rng,
            true,
        )
        .expect("forward");
        let loss = tape
            .bce_with_logits_mean(scores, &GRAD_LABELS)
            .expect("loss");
        if do_backward {
            tape.backward(loss, store).expect("backward");
        }
        tape.value(loss).get(0, 0)
    };

    store.zero_grads();
    loss_only(&mut store, true);
    grad_check(
        |s: &mut ParamStore| loss_only(s, false),
        &mut store,
        1e-5,
        500,
        seed_root,
    )
}
