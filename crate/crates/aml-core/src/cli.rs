//! Command-line entry points: train, compare, gen, eval.
//!
//! Configuration is a flat key=value file overridable by flags (flags win).
//! Every run gets its own directory holding the resolved config snapshot,
//! the per-epoch CSV log, the checkpoint, and a JSON summary; rerunning a
//! name never overwrites (a numeric suffix is appended instead).

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
use crate::eval::MetricSpec;
use crate::graph::{FeatureMode, NormMode, SynthKind, SynthSpec};
use crate::model::{Activation, ModelConfig, PredictorKind, Variant};
use crate::sampler::{SamplerConfig, Side, Strategy};
use crate::train::{
    fit, load_checkpoint, save_checkpoint, FitStatus, TrainConfig, TrainContext,
};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRAIN_ABORT: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Parser)]
#[command(name = "aml", about = "Asymmetric link-prediction training engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write logs, checkpoint, and summary
    Train(TrainArgs),
    /// Train several variants over shared seeds and emit comparison CSVs
    Compare(CompareArgs),
    /// Generate a synthetic dataset directory
    Gen(GenArgs),
    /// Evaluate a checkpoint on a dataset split
    Eval(EvalArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// key=value config file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<String>,
    /// rowwise | edgewise | auto (edgewise for the symmetric baseline)
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// hidden representation width
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    neg_k: Option<usize>,
    /// per-layer neighbor cap, or "full"
    #[arg(long)]
    fanout: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// knowledge transfer: on|off
    #[arg(long)]
    kt: Option<String>,
    /// residual branch: on|off
    #[arg(long)]
    delta: Option<String>,
    /// structure pre-encoding: on|off
    #[arg(long)]
    pe: Option<String>,
    /// homophily composition: on|off
    #[arg(long)]
    ho: Option<String>,
    /// adjacency normalization: row|column|symmetric
    #[arg(long)]
    norm: Option<String>,
    /// batch normalization: on|off
    #[arg(long)]
    bn: Option<String>,
    /// pair predictor: mlp|sum
    #[arg(long)]
    predictor: Option<String>,
    /// add self-loops before pre-encoding: on|off
    #[arg(long)]
    pe_self_loops: Option<String>,
    /// directory for persisted pre-encodings
    #[arg(long)]
    pe_cache: Option<PathBuf>,
    /// treat training links as already directed: on|off
    #[arg(long)]
    directed: Option<String>,
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// comma-separated variant list, e.g. aml,sym_gnn
    #[arg(long)]
    variants: String,
    /// comma-separated seeds, e.g. 0,1,2
    #[arg(long, default_value = "0")]
    seeds: String,
    /// comma-separated toggles to ablate on the aml variant (kt,delta,pe,ho)
    #[arg(long, default_value = "")]
    ablations: String,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "sbm")]
    kind: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    feat_dim: usize,
    /// gaussian | block_onehot
    #[arg(long, default_value = "gaussian")]
    feature_mode: String,
    /// label resample probability for block_onehot features
    #[arg(long, default_value_t = 0.3)]
    flip_prob: f64,
    #[arg(long, default_value_t = 0.8)]
    frac_train: f64,
    #[arg(long, default_value_t = 0.1)]
    frac_valid: f64,
    #[arg(long, default_value_t = 0.1)]
    frac_test: f64,
    /// evaluation negatives drawn per positive
    #[arg(long, default_value_t = 50)]
    eval_negs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// valid | test
    #[arg(long, default_value = "test")]
    split: String,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub name: String,
    pub directed: bool,
    resolved: BTreeMap<String, String>,
}

fn parse_on_off(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(CoreError::InvalidConfig(format!(
            "{key} must be on or off, got '{other}'"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CoreError::InvalidConfig(format!("invalid value '{v}' for {key}")))
}

const CONFIG_KEYS: &[&str] = &[
    "variant",
    "strategy",
    "batch_size",
    "neg_k",
    "seed",
    "epochs",
    "lr",
    "lambda",
    "layers",
    "dim",
    "fanout",
    "metric",
    "eval_every",
    "patience",
    "kt",
    "delta",
    "pe",
    "ho",
    "norm",
    "bn",
    "predictor",
    "pe_self_loops",
    "pe_cache",
    "directed",
    "name",
    "data",
    "out",
];

fn kv_defaults() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: &str| m.insert(k.to_string(), v.to_string());
    put("variant", "aml");
    put("strategy", "auto");
    put("batch_size", "1024");
    put("neg_k", "1");
    put("seed", "0");
    put("epochs", "20");
    put("lr", "0.001");
    put("lambda", "0");
    put("layers", "2");
    put("dim", "16");
    put("fanout", "10");
    put("metric", "hits@10");
    put("eval_every", "1");
    put("patience", "0");
    put("kt", "on");
    put("delta", "on");
    put("pe", "on");
    put("ho", "on");
    put("norm", "row");
    put("bn", "on");
    put("predictor", "mlp");
    put("pe_self_loops", "off");
    put("pe_cache", "");
    put("directed", "off");
    m
}

fn apply_config_file(map: &mut BTreeMap<String, String>, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CoreError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: "expected key=value".into(),
        })?;
        let k = k.trim();
        if !CONFIG_KEYS.contains(&k) {
            return Err(CoreError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("unknown config key '{k}'"),
            });
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(())
}

fn apply_flags(map: &mut BTreeMap<String, String>, a: &CommonArgs) {
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    put("seed", a.seed.map(|v| v.to_string()));
    put("variant", a.variant.clone());
    put("strategy", a.strategy.clone());
    put("epochs", a.epochs.map(|v| v.to_string()));
    put("lr", a.lr.map(|v| v.to_string()));
    put("lambda", a.lambda.map(|v| v.to_string()));
    put("batch_size", a.batch_size.map(|v| v.to_string()));
    put("layers", a.layers.map(|v| v.to_string()));
    put("dim", a.dim.map(|v| v.to_string()));
    put("neg_k", a.neg_k.map(|v| v.to_string()));
    put("fanout", a.fanout.clone());
    put("metric", a.metric.clone());
    put("eval_every", a.eval_every.map(|v| v.to_string()));
    put("patience", a.patience.map(|v| v.to_string()));
    put("kt", a.kt.clone());
    put("delta", a.delta.clone());
    put("pe", a.pe.clone());
    put("ho", a.ho.clone());
    put("norm", a.norm.clone());
    put("bn", a.bn.clone());
    put("predictor", a.predictor.clone());
    put("pe_self_loops", a.pe_self_loops.clone());
    put("pe_cache", a.pe_cache.as_ref().map(|p| p.display().to_string()));
    put("directed", a.directed.clone());
    put("name", a.name.clone());
    put("data", a.data.as_ref().map(|p| p.display().to_string()));
    put("out", a.out.as_ref().map(|p| p.display().to_string()));
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut map = kv_defaults();
    if let Some(path) = &common.config {
        apply_config_file(&mut map, path)?;
    }
    apply_flags(&mut map, common);

    let get = |k: &str| map.get(k).cloned().unwrap_or_default();
    let variant = Variant::parse(&get("variant"))?;
    let strategy = match get("strategy").as_str() {
        "auto" => {
            if variant == Variant::SymGnn {
                Strategy::EdgeWise
            } else {
                Strategy::RowWise
            }
        }
        s => Strategy::parse(s)?,
    };
    let fanout = match get("fanout").as_str() {
        "full" | "none" | "inf" => None,
        s => Some(parse_num::<usize>("fanout", s)?),
    };
    let model = ModelConfig {
        variant,
        layers: parse_num("layers", &get("layers"))?,
        hidden_dim: parse_num("dim", &get("dim"))?,
        knowledge_transfer: parse_on_off("kt", &get("kt"))?,
        residual_delta: parse_on_off("delta", &get("delta"))?,
        pre_encode: parse_on_off("pe", &get("pe"))?,
        homophily: parse_on_off("ho", &get("ho"))?,
        activation: Activation::Relu,
        batch_norm: parse_on_off("bn", &get("bn"))?,
        norm_mode: NormMode::parse(&get("norm"))?,
        pe_self_loops: parse_on_off("pe_self_loops", &get("pe_self_loops"))?,
        fanout,
        predictor: match get("predictor").as_str() {
            "mlp" => PredictorKind::Mlp,
            "sum" => PredictorKind::Sum,
            other => {
                return Err(CoreError::InvalidConfig(format!(
                    "unknown predictor '{other}'"
                )))
            }
        },
    };
    let seed: u64 = parse_num("seed", &get("seed"))?;
    let sampler = SamplerConfig {
        strategy,
        batch_size: parse_num("batch_size", &get("batch_size"))?,
        seed,
        negatives_per_positive: parse_num("neg_k", &get("neg_k"))?,
        key_side: Side::Head, // bound to the variant when the context is built
    };
    let train = TrainConfig {
        epochs: parse_num("epochs", &get("epochs"))?,
        lr: parse_num("lr", &get("lr"))?,
        lambda: parse_num("lambda", &get("lambda"))?,
        sampler,
        model,
        eval_every: parse_num("eval_every", &get("eval_every"))?,
        patience: parse_num("patience", &get("patience"))?,
        seed,
        metric: MetricSpec::parse(&get("metric"))?,
        pe_cache_dir: map
            .get("pe_cache")
            .filter(|s| !s.is_empty())
            .map(PathBuf::from),
    };
    train.validate()?;

    let data_dir = map
        .get("data")
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .ok_or_else(|| CoreError::InvalidConfig("missing dataset path (--data)".into()))?;
    let out_dir = map
        .get("out")
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    let name = map
        .get("name")
        .filter(|s| !s.is_empty())
        .cloned()
        .unwrap_or_else(|| format!("{}_{}_s{}", variant.as_str(), strategy.as_str(), seed));
    let directed = parse_on_off("directed", &get("directed"))?;

    // normalize derived keys back into the snapshot
    map.insert("strategy".into(), strategy.as_str().into());
    map.insert("name".into(), name.clone());
    Ok(RunConfig {
        train,
        data_dir,
        out_dir,
        name,
        directed,
        resolved: map,
    })
}

/// Creates `base/name`, appending `-1`, `-2`, … if taken.
pub fn unique_dir(base: &Path, name: &str) -> Result<PathBuf> {
    let mut candidate = base.join(name);
    let mut suffix = 0usize;
    while candidate.exists() {
        suffix += 1;
        candidate = base.join(format!("{name}-{suffix}"));
    }
    std::fs::create_dir_all(&candidate)
        .map_err(|e| CoreError::io(candidate.display().to_string(), e))?;
    Ok(candidate)
}

fn write_config_snapshot(map: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (k, v) in map {
        text.push_str(&format!("{k}={v}\n"));
    }
    std::fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Everything one training run produced.
pub struct RunResult {
    pub run_dir: PathBuf,
    pub test_metric: Option<f64>,
    pub best_val: Option<f64>,
    pub total_seconds: f64,
    pub last_counters: crate::cost::CostCounters,
    pub epochs_run: usize,
    pub status: FitStatus,
    pub loss_column: Vec<Option<f64>>,
}

/// Trains once under the resolved config and writes the run directory.
pub fn run_training(cfg: &RunConfig, dataset: &Dataset) -> Result<RunResult> {
    let run_dir = unique_dir(&cfg.out_dir, &cfg.name)?;
    write_config_snapshot(&cfg.resolved, &run_dir.join("config.txt"))?;

    let data = dataset.to_train_data(cfg.train.metric, cfg.directed);
    let mut ctx = TrainContext::new(cfg.train.clone(), &data)?;
    let outcome = fit(&mut ctx, data.valid.as_ref())?;

    outcome.log.write_csv(run_dir.join("trainlog.csv"))?;
    save_checkpoint(&ctx.store, run_dir.join("checkpoint.bin"))?;

    let test_metric = match (&outcome.status, &data.test) {
        (FitStatus::Aborted { .. }, _) | (_, None) => None,
        (_, Some(split)) => Some(ctx.evaluate_split(split, cfg.train.metric)?),
    };
    let total_seconds: f64 = outcome.log.records.iter().map(|r| r.seconds).sum();
    let last_counters = outcome
        .log
        .records
        .last()
        .map(|r| r.counters)
        .unwrap_or_default();

    let status_str = match &outcome.status {
        FitStatus::Completed => "completed".to_string(),
        FitStatus::EarlyStopped { at_epoch } => format!("early_stopped@{at_epoch}"),
        FitStatus::Aborted { at_epoch, message } => format!("aborted@{at_epoch}: {message}"),
    };
    let summary = serde_json::json!({
        "name": cfg.name,
        "variant": cfg.train.model.variant.as_str(),
        "seed": cfg.train.seed,
        "metric": cfg.train.metric.label(),
        "final_metric": test_metric,
        "best_val": outcome.best_val,
        "total_seconds": total_seconds,
        "epochs_run": outcome.log.records.len(),
        "status": status_str,
        "counters": {
            "gnn_nodes": last_counters.gnn_node_computations,
            "mlp_nodes": last_counters.mlp_node_computations,
            "gnn_cone_nodes": last_counters.gnn_cone_nodes,
            "spmm_flops": last_counters.spmm_flops,
            "dense_flops": last_counters.dense_flops,
        },
    });
    let summary_text = serde_json::to_string_pretty(&summary).expect("serializable");
    std::fs::write(run_dir.join("summary.json"), &summary_text)
        .map_err(|e| CoreError::io(run_dir.display().to_string(), e))?;
    println!("{summary_text}");

    Ok(RunResult {
        run_dir,
        test_metric,
        best_val: outcome.best_val,
        total_seconds,
        last_counters,
        epochs_run: outcome.log.records.len(),
        status: outcome.status,
        loss_column: outcome.log.loss_column(),
    })
}

fn cmd_train(args: &TrainArgs) -> i32 {
    let cfg = match resolve_config(&args.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dataset = match Dataset::load_dir(&cfg.data_dir) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run_training(&cfg, &dataset) {
        Ok(result) => match result.status {
            FitStatus::Aborted { .. } => EXIT_TRAIN_ABORT,
            _ => EXIT_OK,
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_TRAIN_ABORT
        }
    }
}

fn cmd_gen(args: &GenArgs) -> i32 {
    let inner = || -> Result<PathBuf> {
        let kind = SynthKind::parse(&args.kind)?;
        let feature_mode = match args.feature_mode.as_str() {
            "gaussian" => FeatureMode::Gaussian,
            "block_onehot" => FeatureMode::NoisyBlockOneHot {
                flip_prob: args.flip_prob,
            },
            other => {
                return Err(CoreError::InvalidConfig(format!(
                    "unknown feature mode '{other}'"
                )))
            }
        };
        let spec = SynthSpec {
            kind,
            num_nodes: args.n,
            blocks: args.blocks,
            p_in: args.p_in,
            p_out: args.p_out,
            feat_dim: args.feat_dim,
            feature_mode,
            frac_train: args.frac_train,
            frac_valid: args.frac_valid,
            frac_test: args.frac_test,
        };
        let dataset = Dataset::from_synthetic(&spec, args.seed, args.eval_negs)?;
        let parent = args.out.parent().unwrap_or(Path::new("."));
        let name = args
            .out
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CoreError::InvalidConfig("invalid --out path".into()))?;
        let dir = unique_dir(parent, name)?;
        dataset.write_dir(&dir)?;
        Ok(dir)
    };
    match inner() {
        Ok(dir) => {
            println!(
                "{}",
                serde_json::json!({ "dir": dir.display().to_string() })
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn cmd_eval(args: &EvalArgs) -> i32 {
    let inner = || -> Result<serde_json::Value> {
        let cfg = resolve_config(&args.common)?;
        let dataset = Dataset::load_dir(&cfg.data_dir)?;
        let data = dataset.to_train_data(cfg.train.metric, cfg.directed);
        let mut ctx = TrainContext::new(cfg.train.clone(), &data)?;
        load_checkpoint(&mut ctx.store, &args.checkpoint)?;
        let split = match args.split.as_str() {
            "valid" => data.valid.clone(),
            "test" => data.test.clone(),
            other => {
                return Err(CoreError::InvalidConfig(format!(
                    "unknown split '{other}' (expected valid|test)"
                )))
            }
        }
        .ok_or_else(|| CoreError::InvalidConfig("split not present in dataset".into()))?;
        let value = ctx.evaluate_split(&split, cfg.train.metric)?;
        Ok(serde_json::json!({
            "metric": cfg.train.metric.label(),
            "split": args.split,
            "value": value,
        }))
    };
    match inner() {
        Ok(v) => {
            println!("{v}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// One comparison row: a labeled variant (possibly an ablation) under one
/// seed.
struct CompareRow {
    label: String,
    seed: u64,
    metric: Option<f64>,
    seconds: f64,
    gnn_nodes: u64,
    mlp_nodes: u64,
}

fn cmd_compare(args: &CompareArgs) -> i32 {
    let base = match resolve_config(&args.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dataset = match Dataset::load_dir(&base.data_dir) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let seeds: Vec<u64> = match args
        .seeds
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<u64>("seeds", s.trim()))
        .collect::<Result<Vec<_>>>()
    {
        Ok(s) if !s.is_empty() => s,
        _ => {
            eprintln!("error: invalid --seeds list");
            return EXIT_CONFIG;
        }
    };

    // (label, variant key, toggle overridden off)
    let mut runs: Vec<(String, String, Option<&'static str>)> = Vec::new();
    for v in args.variants.split(',').filter(|s| !s.is_empty()) {
        runs.push((v.trim().to_string(), v.trim().to_string(), None));
    }
    for toggle in args.ablations.split(',').filter(|s| !s.is_empty()) {
        let toggle = match toggle.trim() {
            "kt" => "kt",
            "delta" => "delta",
            "pe" => "pe",
            "ho" => "ho",
            other => {
                eprintln!("error: unknown ablation '{other}'");
                return EXIT_CONFIG;
            }
        };
        runs.push((format!("aml_wo_{toggle}"), "aml".to_string(), Some(toggle)));
    }
    if runs.is_empty() {
        eprintln!("error: --variants list is empty");
        return EXIT_CONFIG;
    }

    let compare_dir = match unique_dir(&base.out_dir, &format!("compare_{}", base.name)) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let mut rows: Vec<CompareRow> = Vec::new();
    let mut any_failed = false;
    for (label, variant_key, ablated) in &runs {
        for &seed in &seeds {
            let mut common = args.common.clone();
            common.variant = Some(variant_key.clone());
            common.seed = Some(seed);
            common.name = Some(format!("{label}_s{seed}"));
            common.out = Some(compare_dir.clone());
            if let Some(toggle) = ablated {
                match *toggle {
                    "kt" => common.kt = Some("off".into()),
                    "delta" => common.delta = Some("off".into()),
                    "pe" => common.pe = Some("off".into()),
                    "ho" => common.ho = Some("off".into()),
                    _ => unreachable!(),
                }
            }
            let outcome = resolve_config(&common).and_then(|cfg| run_training(&cfg, &dataset));
            match outcome {
                Ok(res) => rows.push(CompareRow {
                    label: label.clone(),
                    seed,
                    metric: res.test_metric,
                    seconds: res.total_seconds,
                    gnn_nodes: res.last_counters.gnn_node_computations,
                    mlp_nodes: res.last_counters.mlp_node_computations,
                }),
                Err(e) => {
                    eprintln!("error: run {label} seed {seed} failed: {e}");
                    any_failed = true;
                }
            }
        }
    }

    let mut csv = String::from("variant,seed,metric,seconds,gnn_nodes,mlp_nodes\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label,
            r.seed,
            r.metric.map(|m| m.to_string()).unwrap_or_default(),
            r.seconds,
            r.gnn_nodes,
            r.mlp_nodes
        ));
    }
    if let Err(e) = std::fs::write(compare_dir.join("comparison.csv"), &csv) {
        eprintln!("error: {e}");
        return EXIT_PARTIAL;
    }

    // aggregate per label
    let mut summary = String::from(
        "variant,seeds,mean_metric,std_metric,mean_seconds,mean_gnn_nodes,mean_mlp_nodes\n",
    );
    for (label, _, _) in &runs {
        let group: Vec<&CompareRow> = rows.iter().filter(|r| &r.label == label).collect();
        if group.is_empty() {
            continue;
        }
        let metrics: Vec<f64> = group.iter().filter_map(|r| r.metric).collect();
        let mean = metrics.iter().sum::<f64>() / metrics.len().max(1) as f64;
        let std = if metrics.len() > 1 {
            (metrics.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (metrics.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        let mean_seconds = group.iter().map(|r| r.seconds).sum::<f64>() / group.len() as f64;
        let mean_gnn = group.iter().map(|r| r.gnn_nodes).sum::<u64>() as f64 / group.len() as f64;
        let mean_mlp = group.iter().map(|r| r.mlp_nodes).sum::<u64>() as f64 / group.len() as f64;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            label,
            group.len(),
            if metrics.is_empty() {
                String::new()
            } else {
                mean.to_string()
            },
            std,
            mean_seconds,
            mean_gnn,
            mean_mlp
        ));
    }
    if let Err(e) = std::fs::write(compare_dir.join("comparison_summary.csv"), &summary) {
        eprintln!("error: {e}");
        return EXIT_PARTIAL;
    }
    println!(
        "{}",
        serde_json::json!({
            "dir": compare_dir.display().to_string(),
            "rows": rows.len(),
            "failed": any_failed,
        })
    );
    if any_failed {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

/// Parses argv and dispatches; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own help/version output
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a),
    }
}
