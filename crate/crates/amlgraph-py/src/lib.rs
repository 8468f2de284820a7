//! Python bindings: graph construction, normalization, pre-encoding,
//! ranking metrics, synthetic dataset generation, and training runs.

use aml_core::dataset::Dataset;
use aml_core::eval::MetricSpec;
use aml_core::graph::{self, CsrGraph, FeatureMode, NormMode, SynthKind, SynthSpec};
use aml_core::model::{ModelConfig, PredictorKind, Variant};
use aml_core::nn::DenseMatrix;
use aml_core::sampler::{SamplerConfig, Side, Strategy};
use aml_core::train::{fit, FitStatus, TrainConfig, TrainContext};
use aml_core::CoreError;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: CoreError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    let mut data = Vec::with_capacity(r * c);
    for row in rows {
        data.extend(row);
    }
    Ok(DenseMatrix::from_vec(r, c, data))
}

fn from_matrix(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Sparse adjacency in compressed row form.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Graph {
    inner: CsrGraph,
}

#[pymethods]
impl Graph {
    #[staticmethod]
    fn from_edges(num_nodes: usize, edges: Vec<(u32, u32)>) -> PyResult<Graph> {
        Ok(Graph {
            inner: CsrGraph::from_edges(num_nodes, &edges).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_edge_list(path: &str, num_nodes: usize) -> PyResult<Graph> {
        Ok(Graph {
            inner: CsrGraph::load_edge_list(path, num_nodes).map_err(err)?,
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    /// Normalized copy; mode is "row", "column", or "symmetric".
    fn normalize(&self, mode: &str) -> PyResult<Graph> {
        let mode = NormMode::parse(mode).map_err(err)?;
        Ok(Graph {
            inner: self.inner.normalize(mode),
        })
    }

    fn neighbors(&self, node: u32) -> PyResult<(Vec<u32>, Vec<f64>)> {
        if node as usize >= self.inner.num_nodes() {
            return Err(PyValueError::new_err("node id out of range"));
        }
        let (cols, vals) = self.inner.neighbors(node);
        Ok((cols.to_vec(), vals.to_vec()))
    }

    /// Sparse-times-dense product with an N×c matrix given as nested lists.
    fn spmm(&self, dense: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = to_matrix(dense)?;
        Ok(from_matrix(&self.inner.spmm(&m).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, nnz={})",
            self.inner.num_nodes(),
            self.inner.nnz()
        )
    }
}

/// One-time structure pre-encoding: returns `(v0, delta0)` where `v0` is
/// the L-step propagation of the features and `delta0 = X - v0`.
#[pyfunction]
fn pre_encode(
    graph: &Graph,
    features: Vec<Vec<f64>>,
    layers: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let x = to_matrix(features)?;
    let pe = graph::pre_encode(&graph.inner, &x, layers).map_err(err)?;
    Ok((from_matrix(&pe.v0), from_matrix(&pe.delta0)))
}

/// Fraction of positives scoring strictly above the K-th largest negative.
#[pyfunction]
fn hits_at_k(pos_scores: Vec<f64>, neg_scores: Vec<f64>, k: usize) -> PyResult<f64> {
    aml_core::eval::hits_at_k(&pos_scores, &neg_scores, k).map_err(err)
}

/// Reciprocal rank of one positive among its candidates (ties count
/// against the positive).
#[pyfunction]
fn mrr(pos_score: f64, candidate_neg_scores: Vec<f64>) -> PyResult<f64> {
    aml_core::eval::mrr(pos_score, &candidate_neg_scores).map_err(err)
}

/// Generates a synthetic dataset directory and returns its path.
#[pyfunction]
#[pyo3(signature = (
    out_dir,
    kind = "sbm",
    n = 200,
    blocks = 2,
    p_in = 0.1,
    p_out = 0.01,
    feat_dim = 16,
    feature_mode = "gaussian",
    flip_prob = 0.3,
    frac_train = 0.8,
    frac_valid = 0.1,
    frac_test = 0.1,
    eval_negs = 50,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    out_dir: &str,
    kind: &str,
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    feat_dim: usize,
    feature_mode: &str,
    flip_prob: f64,
    frac_train: f64,
    frac_valid: f64,
    frac_test: f64,
    eval_negs: usize,
    seed: u64,
) -> PyResult<String> {
    let spec = SynthSpec {
        kind: SynthKind::parse(kind).map_err(err)?,
        num_nodes: n,
        blocks,
        p_in,
        p_out,
        feat_dim,
        feature_mode: match feature_mode {
            "gaussian" => FeatureMode::Gaussian,
            "block_onehot" => FeatureMode::NoisyBlockOneHot { flip_prob },
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown feature mode '{other}'"
                )))
            }
        },
        frac_train,
        frac_valid,
        frac_test,
    };
    let dataset = Dataset::from_synthetic(&spec, seed, eval_negs).map_err(err)?;
    dataset.write_dir(out_dir).map_err(err)?;
    Ok(out_dir.to_string())
}

/// Trains one model on a dataset directory and returns a summary dict.
#[pyfunction]
#[pyo3(signature = (
    data_dir,
    variant = "aml",
    strategy = None,
    epochs = 20,
    lr = 1e-3,
    lambda_ = 0.0,
    batch_size = 1024,
    layers = 2,
    dim = 16,
    neg_k = 1,
    fanout = Some(10),
    metric = "hits@10",
    eval_every = 1,
    patience = 0,
    seed = 0,
    kt = true,
    delta = true,
    pe = true,
    ho = true,
    batch_norm = true,
    predictor = "mlp",
    directed = false,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data_dir: &str,
    variant: &str,
    strategy: Option<&str>,
    epochs: usize,
    lr: f64,
    lambda_: f64,
    batch_size: usize,
    layers: usize,
    dim: usize,
    neg_k: usize,
    fanout: Option<usize>,
    metric: &str,
    eval_every: usize,
    patience: usize,
    seed: u64,
    kt: bool,
    delta: bool,
    pe: bool,
    ho: bool,
    batch_norm: bool,
    predictor: &str,
    directed: bool,
) -> PyResult<Py<PyDict>> {
    let variant = Variant::parse(variant).map_err(err)?;
    let strategy = match strategy {
        Some(s) => Strategy::parse(s).map_err(err)?,
        None if variant == Variant::SymGnn => Strategy::EdgeWise,
        None => Strategy::RowWise,
    };
    let metric = MetricSpec::parse(metric).map_err(err)?;
    let cfg = TrainConfig {
        epochs,
        lr,
        lambda: lambda_,
        sampler: SamplerConfig {
            strategy,
            batch_size,
            seed,
            negatives_per_positive: neg_k,
            key_side: Side::Head,
        },
        model: ModelConfig {
            variant,
            layers,
            hidden_dim: dim,
            knowledge_transfer: kt,
            residual_delta: delta,
            pre_encode: pe,
            homophily: ho,
            batch_norm,
            fanout,
            predictor: match predictor {
                "mlp" => PredictorKind::Mlp,
                "sum" => PredictorKind::Sum,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown predictor '{other}'"
                    )))
                }
            },
            ..ModelConfig::default()
        },
        eval_every,
        patience,
        seed,
        metric,
        pe_cache_dir: None,
    };
    cfg.validate().map_err(err)?;

    let dataset = Dataset::load_dir(data_dir).map_err(err)?;
    let data = dataset.to_train_data(metric, directed);
    let mut ctx = TrainContext::new(cfg, &data).map_err(err)?;
    let outcome = fit(&mut ctx, data.valid.as_ref()).map_err(err)?;

    let test_metric = match (&outcome.status, &data.test) {
        (FitStatus::Aborted { .. }, _) | (_, None) => None,
        (_, Some(split)) => Some(ctx.evaluate_split(split, metric).map_err(err)?),
    };
    let losses: Vec<Option<f64>> = outcome.log.loss_column();
    let last = outcome.log.records.last();

    let dict = PyDict::new(py);
    dict.set_item("variant", variant.as_str())?;
    dict.set_item("metric", metric.label())?;
    dict.set_item("final_metric", test_metric)?;
    dict.set_item("best_val", outcome.best_val)?;
    dict.set_item("losses", losses)?;
    dict.set_item("epochs_run", outcome.log.records.len())?;
    dict.set_item(
        "total_seconds",
        outcome.log.records.iter().map(|r| r.seconds).sum::<f64>(),
    )?;
    dict.set_item(
        "gnn_nodes",
        last.map(|r| r.counters.gnn_node_computations).unwrap_or(0),
    )?;
    dict.set_item(
        "mlp_nodes",
        last.map(|r| r.counters.mlp_node_computations).unwrap_or(0),
    )?;
    dict.set_item(
        "status",
        match &outcome.status {
            FitStatus::Completed => "completed".to_string(),
            FitStatus::EarlyStopped { at_epoch } => format!("early_stopped@{at_epoch}"),
            FitStatus::Aborted { at_epoch, message } => format!("aborted@{at_epoch}: {message}"),
        },
    )?;
    Ok(dict.into())
}

#[pymodule]
fn amlgraph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_function(wrap_pyfunction!(pre_encode, m)?)?;
    m.add_function(wrap_pyfunction!(hits_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(mrr, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
