//! Layered computation cones for sampled message passing.
//!
//! To evaluate the top-layer representation of a target set, each layer
//! needs the previous layer on the targets plus their (possibly sampled)
//! neighbors. The cone stores, per layer, a sparse slice of the normalized
//! adjacency whose columns index into the next-deeper node list.

use crate::error::{CoreError, Result};
use crate::graph::CsrGraph;
use crate::nn::AdjSlice;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// One expansion step: rows are the layer's output nodes (a prefix of the
/// deeper list), columns index into the deeper node list.
#[derive(Debug, Clone)]
pub struct ConeLayer {
    pub adj: AdjSlice,
    /// Position of each output node inside the deeper node list (for the
    /// self term).
    pub self_index: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Cone {
    /// Innermost (layer-0) node list; feature rows are gathered from here.
    pub base_nodes: Vec<u32>,
    /// Expansion steps applied in order, ending at the targets.
    pub steps: Vec<ConeLayer>,
    /// Total node slots across all levels, target level included.
    pub total_nodes: u64,
}

/// Builds the L-layer cone above `targets`. With a fanout cap, each node's
/// neighbor list is subsampled uniformly without replacement per layer and
/// the kept weights are rescaled by `deg/fanout` so the aggregate stays an
/// unbiased estimate of the full sum.
pub fn build_cone(
    adj: &CsrGraph,
    targets: &[u32],
    layers: usize,
    fanout: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Cone> {
    for &t in targets {
        if t as usize >= adj.num_nodes() {
            return Err(CoreError::NodeOutOfRange {
                id: u64::from(t),
                num_nodes: adj.num_nodes(),
            });
        }
    }

    let mut level: Vec<u32> = targets.to_vec();
    let mut total_nodes = level.len() as u64;
    // steps collected outermost-first, reversed at the end
    let mut steps_rev: Vec<ConeLayer> = Vec::with_capacity(layers);

    for _ in 0..layers {
        let mut deeper: Vec<u32> = level.clone();
        let mut pos: HashMap<u32, usize> =
            deeper.iter().enumerate().map(|(i, &n)| (n, i)).collect();

        let mut row_offsets = Vec::with_capacity(level.len() + 1);
        row_offsets.push(0usize);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let self_index: Vec<usize> = (0..level.len()).collect();

        for &node in &level {
            let (neigh, weights) = adj.neighbors(node);
            let deg = neigh.len();
            let picked: Vec<usize> = match fanout {
                Some(cap) if deg > cap => {
                    let mut idx: Vec<usize> = sample(rng, deg, cap).into_vec();
                    idx.sort_unstable();
                    idx
                }
                _ => (0..deg).collect(),
            };
            let scale = match fanout {
                Some(cap) if deg > cap => deg as f64 / cap as f64,
                _ => 1.0,
            };
            for &e in &picked {
                let n = neigh[e];
                let p = *pos.entry(n).or_insert_with(|| {
                    deeper.push(n);
                    deeper.len() - 1
                });
                cols.push(p);
                vals.push(weights[e] * scale);
            }
            row_offsets.push(cols.len());
        }

        let step = ConeLayer {
            adj: AdjSlice {
                out_rows: level.len(),
                in_rows: deeper.len(),
                row_offsets,
                cols,
                vals,
            },
            self_index,
        };
        steps_rev.push(step);
        total_nodes += deeper.len() as u64;
        level = deeper;
    }

    steps_rev.reverse();
    Ok(Cone {
        base_nodes: level,
        steps: steps_rev,
        total_nodes,
    })
}
