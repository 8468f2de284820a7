//! Mini-batch generation: the row-wise strategy, the edge-wise baseline,
//! and negative sampling.
//!
//! Row-wise epochs cut a seeded node permutation into consecutive key-node
//! blocks and emit every training pair incident to the block, so each
//! training pair appears in exactly one batch per epoch and each key node's
//! message-passing representation is computed once.

use crate::error::Result;
use crate::graph::{EdgeSet, PairIndex};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Which endpoint a sampler groups by. Reversed models group by tail and
/// corrupt heads when drawing negatives; the default groups by head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Head => Side::Tail,
            Side::Tail => Side::Head,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    RowWise,
    EdgeWise,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Strategy> {
        match s {
            "rowwise" => Ok(Strategy::RowWise),
            "edgewise" => Ok(Strategy::EdgeWise),
            other => Err(crate::CoreError::InvalidConfig(format!(
                "unknown strategy '{other}' (expected rowwise|edgewise)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::RowWise => "rowwise",
            Strategy::EdgeWise => "edgewise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    /// Target edge-batch size B.
    pub batch_size: usize,
    pub seed: u64,
    pub negatives_per_positive: usize,
    pub key_side: Side,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            strategy: Strategy::RowWise,
            batch_size: 1024,
            seed: 0,
            negatives_per_positive: 1,
            key_side: Side::Head,
        }
    }
}

/// One mini-batch of labeled pairs plus the distinct endpoint sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub pairs: Vec<(u32, u32, u8)>,
    pub distinct_heads: Vec<u32>,
    pub distinct_tails: Vec<u32>,
}

impl MiniBatch {
    fn from_pairs(pairs: Vec<(u32, u32, u8)>) -> MiniBatch {
        let mut heads: Vec<u32> = pairs.iter().map(|&(h, _, _)| h).collect();
        heads.sort_unstable();
        heads.dedup();
        let mut tails: Vec<u32> = pairs.iter().map(|&(_, t, _)| t).collect();
        tails.sort_unstable();
        tails.dedup();
        MiniBatch {
            pairs,
            distinct_heads: heads,
            distinct_tails: tails,
        }
    }

    pub fn num_positives(&self) -> usize {
        self.pairs.iter().filter(|&&(_, _, l)| l == 1).count()
    }
}

/// Pairs that negative draws must avoid (typically all known positives).
#[derive(Debug, Clone, Default)]
pub struct ExclusionSet {
    set: HashSet<(u32, u32)>,
}

impl ExclusionSet {
    pub fn from_edge_sets(sets: &[&EdgeSet]) -> ExclusionSet {
        let mut set = HashSet::new();
        for s in sets {
            for (&p, &l) in s.pairs().iter().zip(s.labels()) {
                if l == 1 {
                    set.insert(p);
                }
            }
        }
        ExclusionSet { set }
    }

    pub fn from_pairs(pairs: &[(u32, u32)]) -> ExclusionSet {
        ExclusionSet {
            set: pairs.iter().copied().collect(),
        }
    }

    pub fn contains(&self, pair: (u32, u32)) -> bool {
        self.set.contains(&pair)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

const NEGATIVE_MAX_TRIES: usize = 100;

/// For each positive, draws `k` corrupted pairs with the chosen endpoint
/// resampled uniformly over `[0, N)`, rejecting exclusion members. Draws
/// that fail 100 times (near-complete graphs) are skipped with a warning.
pub fn negative_sample(
    positives: &[(u32, u32)],
    num_nodes: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
    exclusion: &ExclusionSet,
    corrupt: Side,
) -> Vec<(u32, u32, u8)> {
    let mut out = Vec::with_capacity(positives.len() * k);
    let mut skipped = 0usize;
    for &(h, t) in positives {
        for _ in 0..k {
            let mut accepted = None;
            for _ in 0..NEGATIVE_MAX_TRIES {
                let candidate = match corrupt {
                    Side::Tail => (h, rng.random_range(0..num_nodes as u32)),
                    Side::Head => (rng.random_range(0..num_nodes as u32), t),
                };
                if !exclusion.contains(candidate) {
                    accepted = Some(candidate);
                    break;
                }
            }
            match accepted {
                Some((nh, nt)) => out.push((nh, nt, 0)),
                None => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        eprintln!(
            "warning: skipped {skipped} negative draws after {NEGATIVE_MAX_TRIES} rejections each"
        );
    }
    out
}

/// Row-wise key-block size B̃ = max(1, round(B·N/|E|)).
pub fn rowwise_block_size(batch_size: usize, num_nodes: usize, num_edges: usize) -> usize {
    if num_edges == 0 {
        return num_nodes.max(1);
    }
    let ideal = batch_size as f64 * num_nodes as f64 / num_edges as f64;
    (ideal.round() as usize).max(1)
}

/// Lazily yields one epoch of mini-batches for either strategy.
pub struct EpochBatches<'a> {
    edges: &'a EdgeSet,
    exclusion: &'a ExclusionSet,
    cfg: SamplerConfig,
    neg_rng: ChaCha8Rng,
    plan: Plan,
}

enum Plan {
    RowWise {
        key_index: PairIndex,
        node_order: Vec<u32>,
        block_size: usize,
        cursor: usize,
    },
    EdgeWise {
        pair_order: Vec<usize>,
        cursor: usize,
    },
}

/// Builds the epoch batch sequence; deterministic in `(seed, epoch)`.
pub fn epoch_batches<'a>(
    edges: &'a EdgeSet,
    cfg: &SamplerConfig,
    epoch: u64,
    exclusion: &'a ExclusionSet,
) -> EpochBatches<'a> {
    let mut order_rng = seed::stream(cfg.seed, "sampler", epoch);
    let neg_rng = seed::stream(cfg.seed, "negatives", epoch);
    let plan = match cfg.strategy {
        Strategy::RowWise => {
            let key_index = match cfg.key_side {
                Side::Head => edges.head_index().clone(),
                Side::Tail => edges.tail_index(),
            };
            let mut node_order: Vec<u32> = (0..edges.num_nodes() as u32).collect();
            node_order.shuffle(&mut order_rng);
            let block_size = rowwise_block_size(cfg.batch_size, edges.num_nodes(), edges.len());
            Plan::RowWise {
                key_index,
                node_order,
                block_size,
                cursor: 0,
            }
        }
        Strategy::EdgeWise => {
            let mut pair_order: Vec<usize> = (0..edges.len()).collect();
            pair_order.shuffle(&mut order_rng);
            Plan::EdgeWise {
                pair_order,
                cursor: 0,
            }
        }
    };
    EpochBatches {
        edges,
        exclusion,
        cfg: cfg.clone(),
        neg_rng,
        plan,
    }
}

impl EpochBatches<'_> {
    fn attach_negatives(&mut self, mut pairs: Vec<(u32, u32, u8)>) -> MiniBatch {
        let positives: Vec<(u32, u32)> = pairs.iter().map(|&(h, t, _)| (h, t)).collect();
        let negs = negative_sample(
            &positives,
            self.edges.num_nodes(),
            self.cfg.negatives_per_positive,
            &mut self.neg_rng,
            self.exclusion,
            self.cfg.key_side.opposite(),
        );
        pairs.extend(negs);
        MiniBatch::from_pairs(pairs)
    }
}

impl Iterator for EpochBatches<'_> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        loop {
            let pairs: Vec<(u32, u32, u8)> = match &mut self.plan {
                Plan::RowWise {
                    key_index,
                    node_order,
                    block_size,
                    cursor,
                } => {
                    if *cursor >= node_order.len() {
                        return None;
                    }
                    let end = (*cursor + *block_size).min(node_order.len());
                    let block = &node_order[*cursor..end];
                    *cursor = end;
                    let mut pairs = Vec::new();
                    for &node in block {
                        for &pid in key_index.pairs_of(node) {
                            let (h, t) = self.edges.pairs()[pid];
                            pairs.push((h, t, self.edges.labels()[pid]));
                        }
                    }
                    pairs
                }
                Plan::EdgeWise { pair_order, cursor } => {
                    if *cursor >= pair_order.len() {
                        return None;
                    }
                    let end = (*cursor + self.cfg.batch_size).min(pair_order.len());
                    let ids = &pair_order[*cursor..end];
                    *cursor = end;
                    ids.iter()
                        .map(|&pid| {
                            let (h, t) = self.edges.pairs()[pid];
                            (h, t, self.edges.labels()[pid])
                        })
                        .collect()
                }
            };
            // key blocks whose nodes have no training pairs are skipped
            if pairs.is_empty() {
                continue;
            }
            return Some(self.attach_negatives(pairs));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeSet;

    fn edge_set(n: usize, pairs: &[(u32, u32)]) -> EdgeSet {
        EdgeSet::from_positives(n, pairs.to_vec()).unwrap()
    }

    fn no_negatives(cfg: &mut SamplerConfig) {
        cfg.negatives_per_positive = 0;
    }

    #[test]
    fn rowwise_block_holds_exactly_its_incident_pairs() {
        let edges = edge_set(4, &[(0, 1), (0, 2), (2, 3)]);
        let mut got = Vec::new();
        for &pid in edges.head_index().pairs_of(0) {
            got.push(edges.pairs()[pid]);
        }
        got.sort_unstable();
        assert_eq!(got, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn paper_scale_block_size_arithmetic() {
        // collab-scale counts: 65,536 / (1,179,052 / 235,868) nodes per block
        assert_eq!(rowwise_block_size(65_536, 235_868, 1_179_052), 13_110);
    }

    #[test]
    fn edgewise_batch_sizes() {
        let pairs: Vec<(u32, u32)> = (0..10).map(|i| (i as u32, ((i + 1) % 11) as u32)).collect();
        let edges = edge_set(11, &pairs);
        let mut cfg = SamplerConfig {
            strategy: Strategy::EdgeWise,
            batch_size: 3,
            ..SamplerConfig::default()
        };
        no_negatives(&mut cfg);
        let ex = ExclusionSet::default();
        let sizes: Vec<usize> = epoch_batches(&edges, &cfg, 0, &ex)
            .map(|b| b.pairs.len())
            .collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);

        cfg.batch_size = 100;
        let sizes: Vec<usize> = epoch_batches(&edges, &cfg, 0, &ex)
            .map(|b| b.pairs.len())
            .collect();
        assert_eq!(sizes, vec![10]);
    }

    #[test]
    fn both_strategies_partition_the_training_set() {
        let pairs: Vec<(u32, u32)> = (0..50u32)
            .flat_map(|i| [(i, (i + 1) % 50), (i, (i + 7) % 50)])
            .collect();
        let edges = edge_set(50, &pairs);
        let ex = ExclusionSet::default();
        for strategy in [Strategy::RowWise, Strategy::EdgeWise] {
            let mut cfg = SamplerConfig {
                strategy,
                batch_size: 16,
                seed: 9,
                ..SamplerConfig::default()
            };
            no_negatives(&mut cfg);
            let mut seen: Vec<(u32, u32)> = epoch_batches(&edges, &cfg, 0, &ex)
                .flat_map(|b| b.pairs.into_iter().map(|(h, t, _)| (h, t)))
                .collect();
            seen.sort_unstable();
            let mut want = pairs.clone();
            want.sort_unstable();
            assert_eq!(seen, want, "{strategy:?}");
        }
    }

    #[test]
    fn rowwise_head_locality() {
        let pairs: Vec<(u32, u32)> = (0..40u32).flat_map(|i| [(i, (i + 3) % 40)]).collect();
        let edges = edge_set(40, &pairs);
        let cfg = SamplerConfig {
            strategy: Strategy::RowWise,
            batch_size: 8,
            seed: 2,
            negatives_per_positive: 2,
            key_side: Side::Head,
        };
        let ex = ExclusionSet::from_pairs(&pairs);
        let block = rowwise_block_size(8, 40, 40);
        for batch in epoch_batches(&edges, &cfg, 0, &ex) {
            assert!(batch.distinct_heads.len() <= block);
        }
    }

    #[test]
    fn negative_k_zero_is_empty() {
        let mut rng = crate::seed::stream(0, "negatives", 0);
        let out = negative_sample(
            &[(0, 1)],
            4,
            0,
            &mut rng,
            &ExclusionSet::default(),
            Side::Tail,
        );
        assert!(out.is_empty());
    }

    #[test]
    fn forced_negative_candidate() {
        // N=2, positives {(0,1)}, exclusion = positives: only (0,0) remains
        let mut rng = crate::seed::stream(1, "negatives", 0);
        let ex = ExclusionSet::from_pairs(&[(0, 1)]);
        let out = negative_sample(&[(0, 1)], 2, 1, &mut rng, &ex, Side::Tail);
        assert_eq!(out, vec![(0, 0, 0)]);
    }

    #[test]
    fn negatives_avoid_exclusion_over_many_draws() {
        let pairs: Vec<(u32, u32)> = (0..100u32).map(|i| (i, (i + 1) % 100)).collect();
        let ex = ExclusionSet::from_pairs(&pairs);
        let mut rng = crate::seed::stream(3, "negatives", 0);
        let out = negative_sample(&pairs, 100, 100, &mut rng, &ex, Side::Tail);
        assert_eq!(out.len(), 100 * 100);
        for &(h, t, l) in &out {
            assert_eq!(l, 0);
            assert!(!ex.contains((h, t)));
        }
    }

    #[test]
    fn same_seed_same_batches() {
        let pairs: Vec<(u32, u32)> = (0..30u32).map(|i| (i, (i + 5) % 30)).collect();
        let edges = edge_set(30, &pairs);
        let ex = ExclusionSet::from_pairs(&pairs);
        let cfg = SamplerConfig {
            strategy: Strategy::RowWise,
            batch_size: 6,
            seed: 11,
            negatives_per_positive: 1,
            key_side: Side::Head,
        };
        let a: Vec<MiniBatch> = epoch_batches(&edges, &cfg, 4, &ex).collect();
        let b: Vec<MiniBatch> = epoch_batches(&edges, &cfg, 4, &ex).collect();
        assert_eq!(a, b);
        let c: Vec<MiniBatch> = epoch_batches(&edges, &cfg, 5, &ex).collect();
        assert_ne!(a, c, "different epochs reshuffle");
    }

    #[test]
    fn rowwise_mean_batch_edges_tracks_target() {
        // |E| >= 1000; mean batch positives should be within 5% of B
        let mut pairs = Vec::new();
        for i in 0..400u32 {
            for d in 1..=3u32 {
                pairs.push((i, (i + d) % 400));
            }
        }
        let edges = edge_set(400, &pairs);
        let ex = ExclusionSet::default();
        let mut cfg = SamplerConfig {
            strategy: Strategy::RowWise,
            batch_size: 60,
            seed: 21,
            ..SamplerConfig::default()
        };
        no_negatives(&mut cfg);
        let batches: Vec<MiniBatch> = epoch_batches(&edges, &cfg, 0, &ex).collect();
        let total: usize = batches.iter().map(|b| b.pairs.len()).sum();
        assert_eq!(total, pairs.len());
        let block = rowwise_block_size(60, 400, pairs.len());
        let expected = block as f64 * pairs.len() as f64 / 400.0;
        let mean = total as f64 / batches.len() as f64;
        assert!(
            (mean - expected).abs() <= 0.05 * expected,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn edgewise_head_repeats_are_rare_on_large_graphs() {
        // birthday bound: with N >= 100B the expected fraction of repeated
        // heads in a batch stays under 0.1
        let n = 4000u32;
        let b = 32usize;
        let mut pairs = Vec::new();
        let mut rng = crate::seed::stream(7, "data", 0);
        for _ in 0..6000 {
            let h = rng.random_range(0..n);
            let t = rng.random_range(0..n);
            pairs.push((h, t));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edges = edge_set(n as usize, &pairs);
        let ex = ExclusionSet::default();
        let mut cfg = SamplerConfig {
            strategy: Strategy::EdgeWise,
            batch_size: b,
            seed: 8,
            ..SamplerConfig::default()
        };
        no_negatives(&mut cfg);
        let mut repeats = 0usize;
        let mut total = 0usize;
        for batch in epoch_batches(&edges, &cfg, 0, &ex) {
            repeats += batch.pairs.len() - batch.distinct_heads.len();
            total += batch.pairs.len();
        }
        assert!((repeats as f64 / total as f64) <= 0.1);
    }
}
