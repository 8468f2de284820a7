//! The asymmetric architecture: message-passing head path, weight-sharing
//! MLP tail path with residual branch, homophily composition, and the pair
//! predictor. All published variants are configuration.

mod cone;
mod forward;

pub use cone::{build_cone, Cone, ConeLayer};
pub use forward::{
    compose, forward_batch, head_forward, predict, prepare_model_data, tail_forward, union_sorted,
    ModelData, TailInputs,
};

use crate::error::{CoreError, Result};
use crate::graph::NormMode;
use crate::nn::{BranchNorm, BranchTag, DenseMatrix, NodeId, ParamId, ParamStore};
use crate::sampler::Side;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Aml,
    AmlR,
    Smlp,
    SymGnn,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "aml" => Ok(Variant::Aml),
            "aml_r" => Ok(Variant::AmlR),
            "smlp" => Ok(Variant::Smlp),
            "sym_gnn" => Ok(Variant::SymGnn),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown variant '{other}' (expected aml|aml_r|smlp|sym_gnn)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Aml => "aml",
            Variant::AmlR => "aml_r",
            Variant::Smlp => "smlp",
            Variant::SymGnn => "sym_gnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Pass-through; keeps hand-computed layer arithmetic checkable.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    /// Two-layer MLP with biases over the elementwise pair product.
    Mlp,
    /// Plain summation of the pair product (reduces scoring to a dot
    /// product; test configuration).
    Sum,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub variant: Variant,
    pub layers: usize,
    pub hidden_dim: usize,
    pub knowledge_transfer: bool,
    pub residual_delta: bool,
    pub pre_encode: bool,
    pub homophily: bool,
    pub activation: Activation,
    pub batch_norm: bool,
    pub norm_mode: NormMode,
    /// Whether the pre-encoding adjacency gains self-loops first.
    pub pe_self_loops: bool,
    /// Per-layer neighbor cap for the message-passing path; `None` uses the
    /// full neighborhood.
    pub fanout: Option<usize>,
    pub predictor: PredictorKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Aml,
            layers: 2,
            hidden_dim: 16,
            knowledge_transfer: true,
            residual_delta: true,
            pre_encode: true,
            homophily: true,
            activation: Activation::Relu,
            batch_norm: true,
            norm_mode: NormMode::Row,
            pe_self_loops: false,
            fanout: None,
            predictor: PredictorKind::Mlp,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(CoreError::InvalidConfig("layers must be >= 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(CoreError::InvalidConfig("hidden_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective toggles; the symmetric baseline ignores them all.
    pub fn kt(&self) -> bool {
        self.variant != Variant::SymGnn && self.knowledge_transfer
    }

    pub fn delta(&self) -> bool {
        self.variant != Variant::SymGnn && self.residual_delta && self.pe()
    }

    pub fn pe(&self) -> bool {
        self.variant != Variant::SymGnn && self.pre_encode
    }

    pub fn ho(&self) -> bool {
        self.variant != Variant::SymGnn && self.homophily
    }

    pub fn uses_gnn_stage(&self) -> bool {
        !matches!(self.variant, Variant::Smlp)
    }

    pub fn uses_mlp_stage(&self) -> bool {
        !matches!(self.variant, Variant::SymGnn)
    }
}

/// Which encoder serves a pair side in a wired plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Gnn,
    Mlp,
}

/// Resolved wiring for a variant: which stage runs on each side, which
/// endpoint the row-wise sampler groups by, and whether the homophily term
/// is added into the message-passing side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardPlan {
    pub head_stage: StageKind,
    pub tail_stage: StageKind,
    pub sampler_key: Side,
    pub homophily: bool,
}

impl ForwardPlan {
    pub fn gnn_stages(&self) -> usize {
        [self.head_stage, self.tail_stage]
            .iter()
            .filter(|s| **s == StageKind::Gnn)
            .count()
    }
}

pub fn variant_wire(cfg: &ModelConfig) -> Result<ForwardPlan> {
    cfg.validate()?;
    let plan = match cfg.variant {
        Variant::Aml => ForwardPlan {
            head_stage: StageKind::Gnn,
            tail_stage: StageKind::Mlp,
            sampler_key: Side::Head,
            homophily: cfg.ho(),
        },
        Variant::AmlR => ForwardPlan {
            head_stage: StageKind::Mlp,
            tail_stage: StageKind::Gnn,
            sampler_key: Side::Tail,
            homophily: cfg.ho(),
        },
        Variant::Smlp => ForwardPlan {
            head_stage: StageKind::Mlp,
            tail_stage: StageKind::Mlp,
            sampler_key: Side::Head,
            homophily: cfg.ho(),
        },
        Variant::SymGnn => ForwardPlan {
            head_stage: StageKind::Gnn,
            tail_stage: StageKind::Gnn,
            sampler_key: Side::Head,
            homophily: false,
        },
    };
    Ok(plan)
}

/// Pair scorer parameters.
#[derive(Debug, Clone)]
pub enum Predictor {
    Sum,
    Mlp {
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
    },
}

/// All learnable matrices of one model instance (ids into a store).
///
/// `gnn_w1`/`gnn_w2` are the per-layer affine weights of the
/// message-passing path; with knowledge transfer on, the MLP tail path
/// reads the same storage, otherwise `tail_w1`/`tail_w2` hold its own
/// identically-initialized copies. `delta_w` drives the residual branch.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub gnn_w1: Vec<ParamId>,
    pub gnn_w2: Vec<ParamId>,
    pub tail_w1: Vec<ParamId>,
    pub tail_w2: Vec<ParamId>,
    pub delta_w: Vec<ParamId>,
    pub head_norm: Vec<BranchNorm>,
    pub tail_norm: Vec<BranchNorm>,
    pub predictor: Predictor,
}

fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
    let bound = 1.0 / (rows as f64).sqrt();
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(rng.random_range(-bound..bound));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

impl ModelParams {
    /// Creates and initializes every parameter the configuration needs.
    /// `in_dim` is the node feature width.
    pub fn init(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        in_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ModelParams> {
        cfg.validate()?;
        let r = cfg.hidden_dim;
        let dim_in = |layer: usize| if layer == 0 { in_dim } else { r };

        let mut gnn_w1 = Vec::new();
        let mut gnn_w2 = Vec::new();
        for l in 0..cfg.layers {
            gnn_w1.push(store.add(
                format!("gnn.l{}.w1", l + 1),
                init_matrix(rng, dim_in(l), r),
                true,
            ));
            gnn_w2.push(store.add(
                format!("gnn.l{}.w2", l + 1),
                init_matrix(rng, dim_in(l), r),
                true,
            ));
        }

        let (mut tail_w1, mut tail_w2) = (Vec::new(), Vec::new());
        if cfg.uses_mlp_stage() && !cfg.kt() {
            for l in 0..cfg.layers {
                let w1 = store.value(gnn_w1[l]).clone();
                let w2 = store.value(gnn_w2[l]).clone();
                tail_w1.push(store.add(format!("tail.l{}.w1", l + 1), w1, true));
                tail_w2.push(store.add(format!("tail.l{}.w2", l + 1), w2, true));
            }
        }

        let mut delta_w = Vec::new();
        if cfg.delta() {
            for l in 0..cfg.layers {
                delta_w.push(store.add(
                    format!("delta.l{}.w", l + 1),
                    init_matrix(rng, dim_in(l), r),
                    true,
                ));
            }
        }

        let mut head_norm = Vec::new();
        let mut tail_norm = Vec::new();
        if cfg.batch_norm {
            if cfg.uses_gnn_stage() {
                for l in 0..cfg.layers {
                    head_norm.push(BranchNorm::create(
                        store,
                        &format!("norm.head.l{}", l + 1),
                        BranchTag::Head,
                        r,
                    ));
                }
            }
            if cfg.uses_mlp_stage() {
                for l in 0..cfg.layers {
                    tail_norm.push(BranchNorm::create(
                        store,
                        &format!("norm.tail.l{}", l + 1),
                        BranchTag::Tail,
                        r,
                    ));
                }
            }
        }

        let predictor = match cfg.predictor {
            PredictorKind::Sum => Predictor::Sum,
            PredictorKind::Mlp => Predictor::Mlp {
                w1: store.add("pred.w1", init_matrix(rng, r, r), true),
                b1: store.add("pred.b1", DenseMatrix::zeros(1, r), true),
                w2: store.add("pred.w2", init_matrix(rng, r, 1), true),
                b2: store.add("pred.b2", DenseMatrix::zeros(1, 1), true),
            },
        };

        Ok(ModelParams {
            gnn_w1,
            gnn_w2,
            tail_w1,
            tail_w2,
            delta_w,
            head_norm,
            tail_norm,
            predictor,
        })
    }

    /// Weight ids the tail path reads: shared storage under knowledge
    /// transfer, its own copies otherwise.
    pub fn tail_weight_ids(&self, cfg: &ModelConfig) -> (&[ParamId], &[ParamId]) {
        if cfg.kt() {
            (&self.gnn_w1, &self.gnn_w2)
        } else {
            (&self.tail_w1, &self.tail_w2)
        }
    }
}

/// Final pair representations, row-aligned with the distinct endpoint lists.
#[derive(Debug, Clone, Copy)]
pub struct HeadTailReps {
    pub u: NodeId,
    pub v: NodeId,
}
