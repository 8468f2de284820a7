//! The end-to-end training loop: loss, epochs, optimization, evaluation,
//! checkpointing, and early stopping.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::cost::CostCounters;
use crate::error::{CoreError, Result};
use crate::eval::{evaluate, EvalSplit, MetricSpec};
use crate::graph::{symmetrize, CsrGraph, EdgeSet, FeatureMatrix};
use crate::model::{
    forward_batch, prepare_model_data, variant_wire, ModelConfig, ModelData, ModelParams,
};
use crate::nn::{adam_step, AdamConfig, DenseMatrix, NodeId, ParamStore, Tape};
use crate::sampler::{epoch_batches, ExclusionSet, SamplerConfig};
use crate::seed;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Maximum number of epochs T.
    pub epochs: usize,
    pub lr: f64,
    /// Frobenius regularization coefficient; applied inside the optimizer.
    pub lambda: f64,
    pub sampler: SamplerConfig,
    pub model: ModelConfig,
    /// Evaluate on the validation split every this many epochs (0 = never).
    pub eval_every: usize,
    /// Early-stop after this many non-improving evaluations (0 = disabled).
    pub patience: usize,
    pub seed: u64,
    pub metric: MetricSpec,
    /// Directory for persisted pre-encodings (none = in-memory only).
    pub pe_cache_dir: Option<std::path::PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr: 1e-3,
            lambda: 0.0,
            sampler: SamplerConfig::default(),
            model: ModelConfig::default(),
            eval_every: 1,
            patience: 0,
            seed: 0,
            metric: MetricSpec::HitsAt(10),
            pe_cache_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(CoreError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(CoreError::InvalidConfig("lr must be > 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(CoreError::InvalidConfig("lambda must be >= 0".into()));
        }
        if self.sampler.batch_size < 1 {
            return Err(CoreError::InvalidConfig("batch_size must be >= 1".into()));
        }
        self.model.validate()
    }
}

/// One epoch's log line.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-pair loss; absent when no batch produced an update.
    pub mean_loss: Option<f64>,
    /// Wall-clock seconds around the batch loop only.
    pub seconds: f64,
    pub val_metric: Option<f64>,
    pub counters: CostCounters,
    /// Loss terms contributed this epoch (positives plus negatives).
    pub pairs_processed: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,seconds,val_metric,gnn_nodes,mlp_nodes\n");
        for r in &self.records {
            let loss = r.mean_loss.map(|v| v.to_string()).unwrap_or_default();
            let val = r.val_metric.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                loss,
                r.seconds,
                val,
                r.counters.gnn_node_computations,
                r.counters.mlp_node_computations
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv())
            .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))
    }

    /// The loss column alone, for determinism comparisons.
    pub fn loss_column(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.mean_loss).collect()
    }
}

/// Training inputs: raw adjacency (training links only), features, and the
/// link splits.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub graph: CsrGraph,
    pub features: FeatureMatrix,
    /// Undirected positive training links, one direction each.
    pub train_links: Vec<(u32, u32)>,
    /// When false, each training link is expanded into both directions.
    pub directed: bool,
    pub valid: Option<EvalSplit>,
    pub test: Option<EvalSplit>,
    /// Positives outside the training set, excluded from negative draws.
    pub held_out_positives: Vec<(u32, u32)>,
}

/// One training context: parameters, prepared graph data, sampler inputs,
/// and cost counters. Contexts are independent; run one per seed/variant.
pub struct TrainContext {
    pub cfg: TrainConfig,
    pub store: ParamStore,
    pub params: ModelParams,
    pub data: ModelData,
    pub train_edges: EdgeSet,
    pub exclusion: ExclusionSet,
    pub counters: CostCounters,
    sampler_cfg: SamplerConfig,
}

impl TrainContext {
    pub fn new(cfg: TrainConfig, data: &TrainData) -> Result<TrainContext> {
        cfg.model.validate()?;
        let plan = variant_wire(&cfg.model)?;

        let n = data.graph.num_nodes();
        let base = EdgeSet::from_positives(n, data.train_links.clone())?;
        let train_edges = if data.directed {
            base
        } else {
            symmetrize(&base)?
        };

        let mut excl_pairs: Vec<(u32, u32)> = train_edges.pairs().to_vec();
        for &(h, t) in &data.held_out_positives {
            excl_pairs.push((h, t));
            if !data.directed {
                excl_pairs.push((t, h));
            }
        }
        let exclusion = ExclusionSet::from_pairs(&excl_pairs);

        let model_data = prepare_model_data(
            &data.graph,
            data.features.clone(),
            &cfg.model,
            cfg.pe_cache_dir.as_deref(),
        )?;

        let mut store = ParamStore::new();
        let mut init_rng = seed::stream(cfg.seed, "init", 0);
        let params = ModelParams::init(&mut store, &cfg.model, data.features.cols(), &mut init_rng)?;

        let sampler_cfg = SamplerConfig {
            seed: cfg.seed,
            key_side: plan.sampler_key,
            ..cfg.sampler.clone()
        };

        Ok(TrainContext {
            cfg,
            store,
            params,
            data: model_data,
            train_edges,
            exclusion,
            counters: CostCounters::new(),
            sampler_cfg,
        })
    }

    /// Scores arbitrary pairs in inference mode (running statistics, full
    /// neighborhoods); work is not billed to the epoch counters.
    pub fn score_pairs(&mut self, pairs: &[(u32, u32)]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        let mut scratch = CostCounters::new();
        let mut rng = seed::stream(self.cfg.seed, "eval", 0);
        for chunk in pairs.chunks(4096) {
            let mut tape = Tape::new();
            let scores = forward_batch(
                &mut tape,
                &mut self.store,
                &mut scratch,
                &self.cfg.model,
                &self.params,
                &self.data,
                chunk,
                None,
                &mut rng,
                false,
            )?;
            let m = tape.value(scores);
            for i in 0..m.rows() {
                out.push(m.get(i, 0));
            }
        }
        Ok(out)
    }

    pub fn evaluate_split(&mut self, split: &EvalSplit, metric: MetricSpec) -> Result<f64> {
        split.validate(self.data.adj.num_nodes())?;
        evaluate(|pairs| self.score_pairs(pairs), split, metric)
    }
}

/// Mean binary cross-entropy with logits, recorded on the tape.
pub fn batch_loss(tape: &mut Tape, scores: NodeId, labels: &[f64]) -> Result<NodeId> {
    tape.bce_with_logits_mean(scores, labels)
}

/// Runs one pass over the training set: row-wise or edge-wise batches, one
/// optimizer step per non-empty batch. Counters reset at the epoch boundary.
pub fn train_epoch(ctx: &mut TrainContext, epoch: u64) -> Result<EpochRecord> {
    ctx.counters.reset();
    let adam = AdamConfig {
        lr: ctx.cfg.lr,
        weight_decay: ctx.cfg.lambda,
        ..AdamConfig::default()
    };
    let mut fanout_rng = seed::stream(ctx.cfg.seed, "fanout", epoch);

    let started = Instant::now();
    let mut loss_weighted = 0.0f64;
    let mut pair_count = 0usize;

    let batches = epoch_batches(&ctx.train_edges, &ctx.sampler_cfg, epoch, &ctx.exclusion);
    for batch in batches {
        let pairs: Vec<(u32, u32)> = batch.pairs.iter().map(|&(h, t, _)| (h, t)).collect();
        let labels: Vec<f64> = batch.pairs.iter().map(|&(_, _, l)| f64::from(l)).collect();

        let mut tape = Tape::new();
        let scores = forward_batch(
            &mut tape,
            &mut ctx.store,
            &mut ctx.counters,
            &ctx.cfg.model,
            &ctx.params,
            &ctx.data,
            &pairs,
            ctx.cfg.model.fanout,
            &mut fanout_rng,
            true,
        )?;
        let loss = batch_loss(&mut tape, scores, &labels)?;
        let loss_val = tape.value(loss).get(0, 0);
        if !loss_val.is_finite() {
            return Err(CoreError::NonFinite {
                what: "loss",
                context: format!("epoch {epoch}"),
            });
        }
        tape.backward(loss, &mut ctx.store)?;
        adam_step(&mut ctx.store, &adam)?;

        ctx.counters.spmm_flops += tape.flops.spmm;
        ctx.counters.dense_flops += tape.flops.dense;
        loss_weighted += loss_val * labels.len() as f64;
        pair_count += labels.len();
    }
    let seconds = started.elapsed().as_secs_f64();

    Ok(EpochRecord {
        epoch: epoch as usize,
        mean_loss: (pair_count > 0).then(|| loss_weighted / pair_count as f64),
        seconds,
        val_metric: None,
        counters: ctx.counters,
        pairs_processed: pair_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitStatus {
    Completed,
    EarlyStopped { at_epoch: usize },
    /// Training hit a non-finite loss; the context holds the last good
    /// parameters.
    Aborted { at_epoch: usize, message: String },
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub log: TrainLog,
    pub status: FitStatus,
    /// Best validation metric seen, if evaluation ran.
    pub best_val: Option<f64>,
}

/// The outer loop: up to T epochs, periodic validation, early stopping, and
/// best-checkpoint tracking. On return the context's store holds the best
/// parameters (final parameters when no evaluation ran).
pub fn fit(ctx: &mut TrainContext, valid: Option<&EvalSplit>) -> Result<FitOutcome> {
    ctx.cfg.validate()?;
    let mut log = TrainLog::default();
    let mut best_val: Option<f64> = None;
    let mut best_values: Option<Vec<DenseMatrix>> = None;
    let mut bad_evals = 0usize;
    let mut status = FitStatus::Completed;

    for t in 1..=ctx.cfg.epochs {
        let last_good = ctx.store.snapshot_values();
        let mut rec = match train_epoch(ctx, t as u64) {
            Ok(rec) => rec,
            Err(CoreError::NonFinite { what, context }) => {
                ctx.store.restore_values(&last_good)?;
                status = FitStatus::Aborted {
                    at_epoch: t,
                    message: format!("non-finite {what} in {context}"),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        rec.epoch = t;

        if ctx.cfg.eval_every > 0 && t % ctx.cfg.eval_every == 0 {
            if let Some(split) = valid {
                let val = ctx.evaluate_split(split, ctx.cfg.metric)?;
                rec.val_metric = Some(val);
                let improved = best_val.is_none_or(|b| val > b);
                if improved {
                    best_val = Some(val);
                    best_values = Some(ctx.store.snapshot_values());
                    bad_evals = 0;
                } else {
                    bad_evals += 1;
                    if ctx.cfg.patience > 0 && bad_evals >= ctx.cfg.patience {
                        log.records.push(rec);
                        status = FitStatus::EarlyStopped { at_epoch: t };
                        break;
                    }
                }
            }
        }
        log.records.push(rec);
    }

    if let Some(values) = best_values {
        ctx.store.restore_values(&values)?;
    }
    Ok(FitOutcome {
        log,
        status,
        best_val,
    })
}
