//! Dataset directories and their conversion into training inputs.
//!
//! A dataset directory holds:
//!   graph.tsv     adjacency edge list (training links, both directions)
//!   features.bin  N×u feature matrix (8-byte header, f64 little-endian)
//!   train.tsv     training links, one direction each
//!   valid.tsv     evaluation positives (label 1) and negatives (label 0)
//!   test.tsv      same format as valid.tsv

use crate::error::{CoreError, Result};
use crate::eval::{EvalNegatives, EvalSplit, MetricSpec};
use crate::graph::{
    generate_synthetic, read_features, write_features, CsrGraph, EdgeSet, FeatureMatrix,
    SynthData, SynthSpec,
};
use crate::sampler::ExclusionSet;
use crate::seed;
use crate::train::TrainData;
use rand::Rng;
use std::path::Path;

/// Evaluation positives and raw negatives before protocol shaping.
#[derive(Debug, Clone, Default)]
pub struct RawSplit {
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
}

impl RawSplit {
    /// Shapes negatives for the metric: a shared pool for hits@K, and
    /// per-positive candidate lists (grouped by the positive's head) for
    /// MRR when every positive has candidates, otherwise the shared pool.
    pub fn to_eval(&self, metric: MetricSpec) -> EvalSplit {
        let negatives = match metric {
            MetricSpec::HitsAt(_) => EvalNegatives::SharedPool(self.negatives.clone()),
            MetricSpec::Mrr => {
                let lists: Vec<Vec<(u32, u32)>> = self
                    .positives
                    .iter()
                    .map(|&(h, _)| {
                        self.negatives
                            .iter()
                            .filter(|&&(nh, _)| nh == h)
                            .copied()
                            .collect()
                    })
                    .collect();
                if lists.iter().all(|l| !l.is_empty()) {
                    EvalNegatives::PerPositive(lists)
                } else {
                    EvalNegatives::SharedPool(self.negatives.clone())
                }
            }
        };
        EvalSplit {
            positives: self.positives.clone(),
            negatives,
        }
    }

    fn from_edge_set(edges: &EdgeSet) -> RawSplit {
        let mut out = RawSplit::default();
        for (&pair, &label) in edges.pairs().iter().zip(edges.labels()) {
            if label == 1 {
                out.positives.push(pair);
            } else {
                out.negatives.push(pair);
            }
        }
        out
    }
}

/// A materialized dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: CsrGraph,
    pub features: FeatureMatrix,
    pub train_links: Vec<(u32, u32)>,
    pub valid: RawSplit,
    pub test: RawSplit,
}

impl Dataset {
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(CoreError::InvalidConfig(format!(
                "dataset directory '{}' does not exist",
                dir.display()
            )));
        }
        let features = read_features(dir.join("features.bin"))?;
        let n = features.rows();
        let graph = CsrGraph::load_edge_list(dir.join("graph.tsv"), n)?;
        let train = EdgeSet::load_split(dir.join("train.tsv"), n)?;
        if train.labels().iter().any(|&l| l != 1) {
            return Err(CoreError::InvalidConfig(
                "train.tsv must contain positives only".into(),
            ));
        }
        let valid = RawSplit::from_edge_set(&EdgeSet::load_split(dir.join("valid.tsv"), n)?);
        let test = RawSplit::from_edge_set(&EdgeSet::load_split(dir.join("test.tsv"), n)?);
        Ok(Dataset {
            graph,
            features,
            train_links: train.pairs().to_vec(),
            valid,
            test,
        })
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
        let n = self.features.rows();
        write_features(&self.features, dir.join("features.bin"))?;
        self.graph.write_edge_list(dir.join("graph.tsv"))?;
        EdgeSet::from_positives(n, self.train_links.clone())?
            .write_split(dir.join("train.tsv"), true)?;
        let write_split = |raw: &RawSplit, path: std::path::PathBuf| -> Result<()> {
            let mut pairs = raw.positives.clone();
            let mut labels = vec![1u8; pairs.len()];
            pairs.extend(raw.negatives.iter().copied());
            labels.extend(std::iter::repeat(0u8).take(raw.negatives.len()));
            EdgeSet::new(n, pairs, labels)?.write_split(path, true)
        };
        write_split(&self.valid, dir.join("valid.tsv"))?;
        write_split(&self.test, dir.join("test.tsv"))?;
        Ok(())
    }

    /// Generates a synthetic dataset with evaluation negatives attached:
    /// `eval_negatives` per positive, corrupting the tail, excluded from
    /// every known positive in either direction.
    pub fn from_synthetic(
        spec: &SynthSpec,
        seed_root: u64,
        eval_negatives: usize,
    ) -> Result<Dataset> {
        let SynthData {
            graph,
            features,
            train,
            valid,
            test,
            ..
        } = generate_synthetic(spec, seed_root)?;
        let n = graph.num_nodes();

        let mut known: Vec<(u32, u32)> = Vec::new();
        for &(a, b) in train.iter().chain(&valid).chain(&test) {
            known.push((a, b));
            known.push((b, a));
        }
        let exclusion = ExclusionSet::from_pairs(&known);

        let draw = |positives: &[(u32, u32)], stream: u64| -> Vec<(u32, u32)> {
            let mut rng = seed::stream(seed_root, "eval_negatives", stream);
            let mut out = Vec::with_capacity(positives.len() * eval_negatives);
            let mut seen = std::collections::HashSet::new();
            for &(h, _) in positives {
                let mut produced = 0;
                let mut tries = 0;
                while produced < eval_negatives && tries < eval_negatives * 200 {
                    tries += 1;
                    let cand = (h, rng.random_range(0..n as u32));
                    if !exclusion.contains(cand) && seen.insert(cand) {
                        out.push(cand);
                        produced += 1;
                    }
                }
            }
            out
        };

        let valid_split = RawSplit {
            negatives: draw(&valid, 0),
            positives: valid,
        };
        let test_split = RawSplit {
            negatives: draw(&test, 1),
            positives: test,
        };
        Ok(Dataset {
            graph,
            features,
            train_links: train,
            valid: valid_split,
            test: test_split,
        })
    }

    /// Bundles the dataset into training inputs for the given metric.
    pub fn to_train_data(&self, metric: MetricSpec, directed: bool) -> TrainData {
        let mut held_out: Vec<(u32, u32)> = self.valid.positives.clone();
        held_out.extend(self.test.positives.iter().copied());
        TrainData {
            graph: self.graph.clone(),
            features: self.features.clone(),
            train_links: self.train_links.clone(),
            directed,
            valid: Some(self.valid.to_eval(metric)),
            test: Some(self.test.to_eval(metric)),
            held_out_positives: held_out,
        }
    }
}
