//! Seeded synthetic graphs with disjoint train/valid/test link splits.

use super::{CsrGraph, FeatureMatrix};
use crate::error::{CoreError, Result};
use crate::nn::DenseMatrix;
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Sbm,
    Chain,
    Star,
    Erdos,
}

impl SynthKind {
    pub fn parse(s: &str) -> Result<SynthKind> {
        match s {
            "sbm" => Ok(SynthKind::Sbm),
            "chain" => Ok(SynthKind::Chain),
            "star" => Ok(SynthKind::Star),
            "erdos" => Ok(SynthKind::Erdos),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown synthetic kind '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureMode {
    /// Standard normal entries.
    Gaussian,
    /// One-hot of the node's block, with the label resampled uniformly at
    /// random with probability `flip_prob` before encoding.
    NoisyBlockOneHot { flip_prob: f64 },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub num_nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub feature_mode: FeatureMode,
    pub frac_train: f64,
    pub frac_valid: f64,
    pub frac_test: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Sbm,
            num_nodes: 200,
            blocks: 2,
            p_in: 0.1,
            p_out: 0.01,
            feat_dim: 16,
            feature_mode: FeatureMode::Gaussian,
            frac_train: 0.8,
            frac_valid: 0.1,
            frac_test: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// Adjacency over the training links only, both directions.
    pub graph: CsrGraph,
    pub features: FeatureMatrix,
    /// Undirected positive links, one direction each, disjoint across splits.
    pub train: Vec<(u32, u32)>,
    pub valid: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
    /// Block assignment (all zeros for non-SBM kinds).
    pub block_of: Vec<u32>,
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.num_nodes < 2 {
        return Err(CoreError::InvalidConfig("need at least 2 nodes".into()));
    }
    let frac_sum = spec.frac_train + spec.frac_valid + spec.frac_test;
    if !(0.0..=1.0 + 1e-9).contains(&frac_sum) || spec.frac_train <= 0.0 {
        return Err(CoreError::InvalidConfig(
            "split fractions must be positive and sum to at most 1".into(),
        ));
    }
    match spec.kind {
        SynthKind::Sbm => {
            if spec.blocks == 0 || spec.blocks > spec.num_nodes {
                return Err(CoreError::InvalidConfig("invalid block count".into()));
            }
            if !(0.0..=1.0).contains(&spec.p_in) || !(0.0..=1.0).contains(&spec.p_out) {
                return Err(CoreError::InvalidConfig(
                    "edge probabilities must lie in [0,1]".into(),
                ));
            }
        }
        SynthKind::Erdos => {
            if !(0.0..=1.0).contains(&spec.p_in) {
                return Err(CoreError::InvalidConfig(
                    "edge probability must lie in [0,1]".into(),
                ));
            }
        }
        SynthKind::Chain | SynthKind::Star => {}
    }
    if let FeatureMode::NoisyBlockOneHot { flip_prob } = spec.feature_mode {
        if spec.kind != SynthKind::Sbm {
            return Err(CoreError::InvalidConfig(
                "block one-hot features require the sbm kind".into(),
            ));
        }
        if spec.feat_dim < spec.blocks {
            return Err(CoreError::InvalidConfig(
                "feat_dim must be at least the block count for one-hot features".into(),
            ));
        }
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(CoreError::InvalidConfig("flip_prob must lie in [0,1]".into()));
        }
    }
    Ok(())
}

/// Deterministic for a fixed seed; splits never overlap and the returned
/// adjacency contains training links only.
pub fn generate_synthetic(spec: &SynthSpec, seed_root: u64) -> Result<SynthData> {
    validate(spec)?;
    let n = spec.num_nodes;
    let block_of: Vec<u32> = match spec.kind {
        SynthKind::Sbm => {
            let base = n / spec.blocks;
            let mut rem = n % spec.blocks;
            let mut out = Vec::with_capacity(n);
            for b in 0..spec.blocks {
                let mut size = base;
                if rem > 0 {
                    size += 1;
                    rem -= 1;
                }
                out.extend(std::iter::repeat(b as u32).take(size));
            }
            out
        }
        _ => vec![0; n],
    };

    let mut edge_rng = seed::stream(seed_root, "data", 0);
    let mut links: Vec<(u32, u32)> = Vec::new();
    match spec.kind {
        SynthKind::Chain => {
            for i in 0..n - 1 {
                links.push((i as u32, i as u32 + 1));
            }
        }
        SynthKind::Star => {
            for i in 1..n {
                links.push((0, i as u32));
            }
        }
        SynthKind::Erdos => {
            for i in 0..n {
                for j in i + 1..n {
                    if edge_rng.random::<f64>() < spec.p_in {
                        links.push((i as u32, j as u32));
                    }
                }
            }
        }
        SynthKind::Sbm => {
            for i in 0..n {
                for j in i + 1..n {
                    let p = if block_of[i] == block_of[j] {
                        spec.p_in
                    } else {
                        spec.p_out
                    };
                    if edge_rng.random::<f64>() < p {
                        links.push((i as u32, j as u32));
                    }
                }
            }
        }
    }

    let mut split_rng = seed::stream(seed_root, "data", 1);
    links.shuffle(&mut split_rng);
    let m = links.len();
    let n_valid = (spec.frac_valid * m as f64).round() as usize;
    let n_test = (spec.frac_test * m as f64).round() as usize;
    let n_train = m.saturating_sub(n_valid + n_test);
    let train: Vec<(u32, u32)> = links[..n_train].to_vec();
    let valid: Vec<(u32, u32)> = links[n_train..n_train + n_valid].to_vec();
    let test: Vec<(u32, u32)> = links[n_train + n_valid..].to_vec();

    let mut directed: Vec<(u32, u32)> = Vec::with_capacity(train.len() * 2);
    for &(a, b) in &train {
        directed.push((a, b));
        directed.push((b, a));
    }
    let graph = CsrGraph::from_edges(n, &directed)?;

    let mut feat_rng = seed::stream(seed_root, "data", 2);
    let features = match spec.feature_mode {
        FeatureMode::Gaussian => {
            let mut data = Vec::with_capacity(n * spec.feat_dim);
            for _ in 0..n * spec.feat_dim {
                data.push(StandardNormal.sample(&mut feat_rng));
            }
            DenseMatrix::from_vec(n, spec.feat_dim, data)
        }
        FeatureMode::NoisyBlockOneHot { flip_prob } => {
            let mut x = DenseMatrix::zeros(n, spec.feat_dim);
            for i in 0..n {
                let label = if feat_rng.random::<f64>() < flip_prob {
                    feat_rng.random_range(0..spec.blocks as u32)
                } else {
                    block_of[i]
                };
                x.set(i, label as usize, 1.0);
            }
            x
        }
    };

    Ok(SynthData {
        graph,
        features,
        train,
        valid,
        test,
        block_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::symmetrize;
    use crate::graph::EdgeSet;

    fn chain_spec(n: usize) -> SynthSpec {
        SynthSpec {
            kind: SynthKind::Chain,
            num_nodes: n,
            frac_train: 1.0,
            frac_valid: 0.0,
            frac_test: 0.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn chain_of_four_has_three_links_six_directed() {
        let data = generate_synthetic(&chain_spec(4), 0).unwrap();
        assert_eq!(data.train.len(), 3);
        let set = EdgeSet::from_positives(4, data.train.clone()).unwrap();
        let sym = symmetrize(&set).unwrap();
        assert_eq!(sym.len(), 6);
    }

    #[test]
    fn degenerate_sbm_has_no_cross_block_edges() {
        let spec = SynthSpec {
            kind: SynthKind::Sbm,
            num_nodes: 40,
            blocks: 2,
            p_in: 1.0,
            p_out: 0.0,
            frac_train: 1.0,
            frac_valid: 0.0,
            frac_test: 0.0,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec, 3).unwrap();
        assert!(!data.train.is_empty());
        for &(a, b) in &data.train {
            assert_eq!(data.block_of[a as usize], data.block_of[b as usize]);
        }
    }

    #[test]
    fn same_seed_is_identical() {
        let spec = SynthSpec::default();
        let a = generate_synthetic(&spec, 17).unwrap();
        let b = generate_synthetic(&spec, 17).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.test, b.test);
        assert_eq!(a.features.data(), b.features.data());
        assert_eq!(a.graph, b.graph);
    }

    #[test]
    fn splits_are_disjoint() {
        let spec = SynthSpec {
            num_nodes: 100,
            p_in: 0.2,
            p_out: 0.05,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec, 5).unwrap();
        let mut all: Vec<(u32, u32)> = data
            .train
            .iter()
            .chain(&data.valid)
            .chain(&data.test)
            .copied()
            .collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), total);
        assert!(!data.valid.is_empty());
        assert!(!data.test.is_empty());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let spec = SynthSpec {
            kind: SynthKind::Sbm,
            p_in: 1.5,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec, 0).is_err());

        let spec = SynthSpec {
            kind: SynthKind::Chain,
            feature_mode: FeatureMode::NoisyBlockOneHot { flip_prob: 0.1 },
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec, 0).is_err());
    }
}
