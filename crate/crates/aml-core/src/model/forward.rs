//! Taped forward passes for every variant.

use super::cone::build_cone;
use super::{Activation, HeadTailReps, ModelConfig, ModelParams, Predictor, Variant};
use crate::cost::{CostCounters, CostEvent};
use crate::error::{CoreError, Result};
use crate::graph::{pre_encode, CsrGraph, FeatureMatrix, PreEncoding};
use crate::nn::{NodeId, ParamStore, Tape};
use rand_chacha::ChaCha8Rng;

/// Graph-side inputs bound to one model configuration: normalized
/// adjacencies and cached pre-encodings (reversed copies for the
/// tail-grouped variant).
#[derive(Debug, Clone)]
pub struct ModelData {
    pub adj: CsrGraph,
    pub adj_rev: Option<CsrGraph>,
    pub features: FeatureMatrix,
    pub pre: Option<PreEncoding>,
    pub pre_rev: Option<PreEncoding>,
}

/// Normalizes the raw adjacency and computes whatever pre-encodings the
/// variant needs. The pre-encoding runs once here and is reused for the
/// whole run; with a cache directory it is persisted keyed by
/// (graph hash, norm mode, layer count) and reloaded on later runs.
pub fn prepare_model_data(
    raw: &CsrGraph,
    features: FeatureMatrix,
    cfg: &ModelConfig,
    pe_cache_dir: Option<&std::path::Path>,
) -> Result<ModelData> {
    cfg.validate()?;
    if features.rows() != raw.num_nodes() {
        return Err(CoreError::ShapeMismatch {
            context: "features vs graph",
            got_rows: features.rows(),
            got_cols: features.cols(),
            want_rows: raw.num_nodes(),
            want_cols: features.cols(),
        });
    }
    let adj = raw.normalize(cfg.norm_mode);
    let reversed = cfg.variant == Variant::AmlR;
    let adj_rev = reversed.then(|| raw.transpose().normalize(cfg.norm_mode));

    // fold the feature bits in as well; the same graph may carry
    // different feature sets
    let feat_hash = {
        let mut h: u64 = 0xcbf29ce484222325;
        for &v in features.data() {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    };
    let pe_base = |graph: &CsrGraph| -> Result<PreEncoding> {
        let key = crate::graph::pre_encode_cache_key(
            graph,
            cfg.norm_mode,
            cfg.layers,
            cfg.pe_self_loops,
        ) ^ feat_hash;
        let cache_path = pe_cache_dir.map(|dir| dir.join(format!("pe_{key:016x}.bin")));
        if let Some(path) = &cache_path {
            if path.is_file() {
                if let Some(cached) = PreEncoding::load(path, key)? {
                    return Ok(cached);
                }
            }
        }
        let g = if cfg.pe_self_loops {
            graph.with_self_loops().normalize(cfg.norm_mode)
        } else {
            graph.normalize(cfg.norm_mode)
        };
        let pe = pre_encode(&g, &features, cfg.layers)?;
        if let Some(path) = &cache_path {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CoreError::io(dir.display().to_string(), e))?;
            }
            pe.save(path, key)?;
        }
        Ok(pe)
    };

    let (pre, pre_rev) = if cfg.pe() {
        if reversed {
            let rev = raw.transpose();
            (None, Some(pe_base(&rev)?))
        } else {
            (Some(pe_base(raw)?), None)
        }
    } else {
        (None, None)
    };

    Ok(ModelData {
        adj,
        adj_rev,
        features,
        pre,
        pre_rev,
    })
}

fn activate(tape: &mut Tape, x: NodeId, activation: Activation) -> NodeId {
    match activation {
        Activation::Relu => tape.relu(x),
        Activation::Identity => x,
    }
}

/// Message-passing path over the sampled computation cone: per layer, the
/// aggregated neighbor term plus the self term, each through its own weight,
/// then (optionally) the head-branch norm and the activation. Output rows
/// align with `nodes`.
#[allow(clippy::too_many_arguments)]
pub fn head_forward(
    tape: &mut Tape,
    store: &mut ParamStore,
    counters: &mut CostCounters,
    cfg: &ModelConfig,
    params: &ModelParams,
    adj: &CsrGraph,
    features: &FeatureMatrix,
    nodes: &[u32],
    fanout: Option<usize>,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<NodeId> {
    let cone = build_cone(adj, nodes, cfg.layers, fanout, rng)?;
    counters.record(CostEvent::GnnNode, nodes.len() as u64);
    counters.record(CostEvent::GnnCone, cone.total_nodes);

    let base_rows: Vec<usize> = cone.base_nodes.iter().map(|&n| n as usize).collect();
    let mut h = tape.constant(features.gather_rows(&base_rows));

    for (l, step) in cone.steps.iter().enumerate() {
        let neigh = tape.spmm(step.adj.clone(), h)?;
        let own = tape.gather_rows(h, &step.self_index)?;
        let w1 = tape.param(params.gnn_w1[l], store);
        let w2 = tape.param(params.gnn_w2[l], store);
        let a = tape.matmul(neigh, w1)?;
        let b = tape.matmul(own, w2)?;
        let mut z = tape.add(a, b)?;
        if let Some(norm) = params.head_norm.get(l) {
            // a one-row layer input has no batch statistics; use the
            // running ones for that call
            let use_batch_stats = training && tape.value(z).rows() >= 2;
            z = norm.forward(tape, store, z, use_batch_stats)?;
        }
        h = activate(tape, z, cfg.activation);
    }
    Ok(h)
}

/// Input matrices for the tail path, already resolved against the toggles.
pub struct TailInputs<'a> {
    pub v0_source: &'a FeatureMatrix,
    pub delta_source: Option<&'a FeatureMatrix>,
}

impl<'a> TailInputs<'a> {
    /// Picks pre-encoded inputs (or raw features when pre-encoding is off)
    /// for the given configuration.
    pub fn resolve(
        cfg: &ModelConfig,
        features: &'a FeatureMatrix,
        pre: Option<&'a PreEncoding>,
    ) -> Result<TailInputs<'a>> {
        if cfg.pe() {
            let pre = pre.ok_or_else(|| {
                CoreError::InvalidConfig("pre-encoding enabled but not prepared".into())
            })?;
            if pre.layers != cfg.layers {
                return Err(CoreError::InvalidConfig(format!(
                    "pre-encoding computed for {} layers, model has {}",
                    pre.layers, cfg.layers
                )));
            }
            Ok(TailInputs {
                v0_source: &pre.v0,
                delta_source: cfg.delta().then_some(&pre.delta0),
            })
        } else {
            Ok(TailInputs {
                v0_source: features,
                delta_source: None,
            })
        }
    }
}

/// MLP tail path: the weight-sharing trunk from the pre-encoded features
/// plus (optionally) the residual branch from `delta0`, summed at the top.
/// Output rows align with `nodes`.
pub fn tail_forward(
    tape: &mut Tape,
    store: &mut ParamStore,
    counters: &mut CostCounters,
    cfg: &ModelConfig,
    params: &ModelParams,
    inputs: &TailInputs,
    nodes: &[u32],
    training: bool,
) -> Result<NodeId> {
    for &n in nodes {
        if n as usize >= inputs.v0_source.rows() {
            return Err(CoreError::NodeOutOfRange {
                id: u64::from(n),
                num_nodes: inputs.v0_source.rows(),
            });
        }
    }
    counters.record(CostEvent::MlpNode, nodes.len() as u64);
    let rows: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();

    let (w1_ids, w2_ids) = params.tail_weight_ids(cfg);
    let mut vt = tape.constant(inputs.v0_source.gather_rows(&rows));
    for l in 0..cfg.layers {
        let w1 = tape.param(w1_ids[l], store);
        let w2 = tape.param(w2_ids[l], store);
        let a = tape.matmul(vt, w1)?;
        let b = tape.matmul(vt, w2)?;
        let mut z = tape.add(a, b)?;
        if let Some(norm) = params.tail_norm.get(l) {
            let use_batch_stats = training && tape.value(z).rows() >= 2;
            z = norm.forward(tape, store, z, use_batch_stats)?;
        }
        vt = activate(tape, z, cfg.activation);
    }

    if let Some(delta_src) = inputs.delta_source {
        if params.delta_w.len() != cfg.layers {
            return Err(CoreError::InvalidConfig(
                "residual branch enabled but its weights were not created".into(),
            ));
        }
        let mut vd = tape.constant(delta_src.gather_rows(&rows));
        for l in 0..cfg.layers {
            let w = tape.param(params.delta_w[l], store);
            let z = tape.matmul(vd, w)?;
            vd = activate(tape, z, cfg.activation);
        }
        vt = tape.add(vt, vd)?;
    }
    Ok(vt)
}

/// Homophily composition: the head side gains the tail-path rows of the
/// same nodes. Both operands must be row-aligned.
pub fn compose(
    tape: &mut Tape,
    gnn_rows: NodeId,
    mlp_rows_same_nodes: Option<NodeId>,
    homophily: bool,
) -> Result<NodeId> {
    if !homophily {
        return Ok(gnn_rows);
    }
    let other = mlp_rows_same_nodes.ok_or_else(|| {
        CoreError::InvalidConfig("homophily composition needs tail rows for the same nodes".into())
    })?;
    tape.add(gnn_rows, other)
}

fn position_of(sorted: &[u32], node: u32) -> Result<usize> {
    sorted
        .binary_search(&node)
        .map_err(|_| CoreError::NodeOutOfRange {
            id: u64::from(node),
            num_nodes: sorted.len(),
        })
}

/// Scores each pair through the predictor applied to `U_head ⊙ V_tail`.
pub fn predict(
    tape: &mut Tape,
    store: &mut ParamStore,
    reps: HeadTailReps,
    heads: &[u32],
    tails: &[u32],
    pairs: &[(u32, u32)],
    predictor: &Predictor,
) -> Result<NodeId> {
    let mut u_idx = Vec::with_capacity(pairs.len());
    let mut v_idx = Vec::with_capacity(pairs.len());
    for &(h, t) in pairs {
        u_idx.push(position_of(heads, h)?);
        v_idx.push(position_of(tails, t)?);
    }
    let gu = tape.gather_rows(reps.u, &u_idx)?;
    let gv = tape.gather_rows(reps.v, &v_idx)?;
    let prod = tape.hadamard(gu, gv)?;
    match predictor {
        Predictor::Sum => Ok(tape.row_sum(prod)),
        Predictor::Mlp { w1, b1, w2, b2 } => {
            let w1 = tape.param(*w1, store);
            let b1 = tape.param(*b1, store);
            let w2 = tape.param(*w2, store);
            let b2 = tape.param(*b2, store);
            let h = tape.matmul(prod, w1)?;
            let h = tape.add_row_vec(h, b1)?;
            let h = tape.relu(h);
            let out = tape.matmul(h, w2)?;
            tape.add_row_vec(out, b2)
        }
    }
}

/// Sorted union of two sorted unique lists.
pub fn union_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x <= y {
                    if x == y {
                        j += 1;
                    }
                    i += 1;
                    x
                } else {
                    j += 1;
                    y
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => break,
        };
        out.push(next);
    }
    out
}

fn distinct_sorted(values: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut v: Vec<u32> = values.collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Runs the full variant wiring on one batch of pairs and returns the B×1
/// score column. Works for training (taped, batch statistics) and inference
/// (running statistics) alike.
#[allow(clippy::too_many_arguments)]
pub fn forward_batch(
    tape: &mut Tape,
    store: &mut ParamStore,
    counters: &mut CostCounters,
    cfg: &ModelConfig,
    params: &ModelParams,
    data: &ModelData,
    pairs: &[(u32, u32)],
    fanout: Option<usize>,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<NodeId> {
    if pairs.is_empty() {
        return Err(CoreError::InvalidConfig("empty batch".into()));
    }
    let heads = distinct_sorted(pairs.iter().map(|&(h, _)| h));
    let tails = distinct_sorted(pairs.iter().map(|&(_, t)| t));

    let reps = match cfg.variant {
        Variant::Aml => {
            let u_l = head_forward(
                tape, store, counters, cfg, params, &data.adj, &data.features, &heads, fanout,
                rng, training,
            )?;
            let mlp_nodes = if cfg.ho() {
                union_sorted(&heads, &tails)
            } else {
                tails.clone()
            };
            let inputs = TailInputs::resolve(cfg, &data.features, data.pre.as_ref())?;
            let v_all = tail_forward(
                tape, store, counters, cfg, params, &inputs, &mlp_nodes, training,
            )?;
            let gather_from_mlp = |tape: &mut Tape, subset: &[u32]| -> Result<NodeId> {
                let idx: Vec<usize> = subset
                    .iter()
                    .map(|&n| position_of(&mlp_nodes, n))
                    .collect::<Result<_>>()?;
                tape.gather_rows(v_all, &idx)
            };
            let v_tails = gather_from_mlp(tape, &tails)?;
            let u = if cfg.ho() {
                let v_heads = gather_from_mlp(tape, &heads)?;
                compose(tape, u_l, Some(v_heads), true)?
            } else {
                u_l
            };
            HeadTailReps { u, v: v_tails }
        }
        Variant::AmlR => {
            let adj_rev = data.adj_rev.as_ref().ok_or_else(|| {
                CoreError::InvalidConfig("reversed adjacency not prepared".into())
            })?;
            let v_gnn = head_forward(
                tape, store, counters, cfg, params, adj_rev, &data.features, &tails, fanout, rng,
                training,
            )?;
            let mlp_nodes = if cfg.ho() {
                union_sorted(&heads, &tails)
            } else {
                heads.clone()
            };
            let inputs = TailInputs::resolve(cfg, &data.features, data.pre_rev.as_ref())?;
            let u_all = tail_forward(
                tape, store, counters, cfg, params, &inputs, &mlp_nodes, training,
            )?;
            let gather_from_mlp = |tape: &mut Tape, subset: &[u32]| -> Result<NodeId> {
                let idx: Vec<usize> = subset
                    .iter()
                    .map(|&n| position_of(&mlp_nodes, n))
                    .collect::<Result<_>>()?;
                tape.gather_rows(u_all, &idx)
            };
            let u_heads = gather_from_mlp(tape, &heads)?;
            let v = if cfg.ho() {
                let u_tails = gather_from_mlp(tape, &tails)?;
                compose(tape, v_gnn, Some(u_tails), true)?
            } else {
                v_gnn
            };
            HeadTailReps { u: u_heads, v }
        }
        Variant::Smlp => {
            let nodes = union_sorted(&heads, &tails);
            let inputs = TailInputs::resolve(cfg, &data.features, data.pre.as_ref())?;
            let rep = tail_forward(
                tape, store, counters, cfg, params, &inputs, &nodes, training,
            )?;
            let gather = |tape: &mut Tape, subset: &[u32]| -> Result<NodeId> {
                let idx: Vec<usize> = subset
                    .iter()
                    .map(|&n| position_of(&nodes, n))
                    .collect::<Result<_>>()?;
                tape.gather_rows(rep, &idx)
            };
            let u_heads = gather(tape, &heads)?;
            let v_tails = gather(tape, &tails)?;
            let u = if cfg.ho() {
                let again = gather(tape, &heads)?;
                compose(tape, u_heads, Some(again), true)?
            } else {
                u_heads
            };
            HeadTailReps { u, v: v_tails }
        }
        Variant::SymGnn => {
            let u = head_forward(
                tape, store, counters, cfg, params, &data.adj, &data.features, &heads, fanout,
                rng, training,
            )?;
            let v = head_forward(
                tape, store, counters, cfg, params, &data.adj, &data.features, &tails, fanout,
                rng, training,
            )?;
            HeadTailReps { u, v }
        }
    };

    predict(tape, store, reps, &heads, &tails, pairs, &params.predictor)
}
