//! Python bindings: graphs, condensation, budgets, metrics and full
//! experiment runs.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use catcgl::condense::{CondenseConfig, InitMode};
use catcgl::gnn::EncoderConfig;
use catcgl::graph::io::{self, FeatureFormat};
use catcgl::graph::{Adjacency, SbmParams, Split};
use catcgl::harness::ExperimentConfig;
use catcgl::metrics::PerformanceMatrix;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> Result<Array2<f64>, PyErr> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("feature rows must all have the same length"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(err)
}

fn rows(m: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[pyclass(name = "Graph", module = "pycatcgl", frozen)]
struct PyGraph(catcgl::Graph);

#[pymethods]
impl PyGraph {
    /// Builds a graph from an undirected edge list, feature rows, labels and
    /// split names ("train", "val" or "test").
    #[new]
    #[pyo3(signature = (edges, features, labels, split, num_classes=None))]
    fn new(edges: Vec<(usize, usize)>, features: Vec<Vec<f64>>, labels: Vec<usize>, split: Vec<String>, num_classes: Option<usize>) -> PyResult<Self> {
        let x = matrix(features)?;
        let split = split.iter().map(|s| s.parse::<Split>()).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let adj = Adjacency::from_edges(x.nrows(), &edges).map_err(err)?;
        Ok(PyGraph(catcgl::Graph::new(adj, x, labels, split, classes).map_err(err)?))
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.0.num_nodes()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.0.feature_dim()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.0.adjacency().num_edges()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels().to_vec()
    }

    #[getter]
    fn split(&self) -> Vec<String> {
        self.0.split().iter().map(ToString::to_string).collect()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.0.features())
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.adjacency().edges().collect()
    }

    fn train_nodes(&self) -> Vec<usize> {
        self.0.train_nodes()
    }

    /// Dense normalized adjacency with self-loops.
    fn normalized_adjacency(&self) -> Vec<Vec<f64>> {
        rows(catcgl::graph::normalize_adjacency(&self.0).matrix().to_dense().view())
    }

    #[pyo3(signature = (path, csv=false))]
    fn save(&self, path: PathBuf, csv: bool) -> PyResult<()> {
        let fmt = if csv { FeatureFormat::Csv } else { FeatureFormat::Bin };
        io::write_dataset(path, &self.0, fmt).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={}, dim={}, classes={})",
            self.0.num_nodes(),
            self.0.adjacency().num_edges(),
            self.0.feature_dim(),
            self.0.num_classes()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (blocks=10, nodes_per_block=100, p_in=0.1, p_out=0.01, feature_dim=16, feature_separation=3.0, seed=0))]
fn sbm_generate(blocks: usize, nodes_per_block: usize, p_in: f64, p_out: f64, feature_dim: usize, feature_separation: f64, seed: u64) -> PyResult<PyGraph> {
    let params = SbmParams {
        blocks,
        nodes_per_block,
        p_in,
        p_out,
        feature_dim,
        feature_separation,
        seed,
    };
    Ok(PyGraph(catcgl::graph::sbm_generate(&params).map_err(err)?))
}

#[pyfunction]
fn load_dataset(path: PathBuf) -> PyResult<PyGraph> {
    Ok(PyGraph(io::load_dataset(path).map_err(err)?))
}

/// Condenses the training nodes of `graph` into `budget` edgeless nodes.
#[pyfunction]
#[pyo3(signature = (graph, budget, encoders=200, feature_lr=0.01, hidden=512, output=512, init="sample", seed=0))]
#[allow(clippy::too_many_arguments)]
fn condense(graph: &PyGraph, budget: usize, encoders: usize, feature_lr: f64, hidden: usize, output: usize, init: &str, seed: u64) -> PyResult<PyGraph> {
    let init_mode = match init {
        "sample" => InitMode::Sample,
        "noise" => InitMode::Noise,
        other => return Err(PyValueError::new_err(format!("unknown init mode {other:?}"))),
    };
    let cfg = CondenseConfig {
        encoders,
        encoder: EncoderConfig::gcn(hidden, output),
        feature_lr,
        init_mode,
        parallel: false,
    };
    let cond = catcgl::condense::condense(&graph.0, budget, &cfg, seed).map_err(err)?;
    Ok(PyGraph(cond.to_graph()))
}

#[pyfunction]
fn budget_for_task(total_train_nodes: usize, budget_ratio: f64, num_tasks: usize) -> PyResult<usize> {
    catcgl::memory::budget_for_task(total_train_nodes, budget_ratio, num_tasks).map_err(err)
}

fn perf(rows: Vec<Vec<f64>>) -> PyResult<PerformanceMatrix> {
    PerformanceMatrix::from_rows(rows).map_err(err)
}

#[pyfunction]
fn ap(rows: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    perf(rows)?.ap(k).map_err(err)
}

#[pyfunction]
fn ap_mean(rows: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    perf(rows)?.ap_mean(k).map_err(err)
}

/// Backward transfer after task `k`; `None` when `k == 1`.
#[pyfunction]
fn bwt(rows: Vec<Vec<f64>>, k: usize) -> PyResult<Option<f64>> {
    perf(rows)?.bwt(k).map_err(err)
}

/// Runs an experiment from a JSON config string. Returns a dict holding the
/// performance matrices and the metrics report.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(err)?;
    let out = catcgl::harness::run_experiment(&cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("matrix", out.matrix.rows().to_vec())?;
    d.set_item("class_il", out.outcome.class_il.rows().to_vec())?;
    d.set_item("task_il", out.outcome.task_il.rows().to_vec())?;
    d.set_item("ap", out.report.ap)?;
    d.set_item("ap_mean", out.report.ap_mean)?;
    d.set_item("bwt", out.report.bwt)?;
    d.set_item("bank_sizes", out.bank.entries().iter().map(|e| e.num_nodes()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Embedding CSV of `graph` under a seeded untrained encoder.
#[pyfunction]
#[pyo3(signature = (graph, seed=0, hidden=512, output=512))]
fn export_embeddings(graph: &PyGraph, seed: u64, hidden: usize, output: usize) -> PyResult<String> {
    catcgl::harness::export_embeddings(&graph.0, &EncoderConfig::gcn(hidden, output), seed).map_err(err)
}

/// Finite-difference gradient checks as `(name, max_rel_err, passed)`.
#[pyfunction]
#[pyo3(signature = (seeds=20))]
fn gradcheck(seeds: u64) -> PyResult<Vec<(String, f64, bool)>> {
    let results = catcgl::gradcheck::run_all(seeds).map_err(err)?;
    Ok(results.into_iter().map(|r| (r.name.to_string(), r.max_rel_err, r.passed())).collect())
}

#[pymodule]
fn pycatcgl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(sbm_generate, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(condense, m)?)?;
    m.add_function(wrap_pyfunction!(budget_for_task, m)?)?;
    m.add_function(wrap_pyfunction!(ap, m)?)?;
    m.add_function(wrap_pyfunction!(ap_mean, m)?)?;
    m.add_function(wrap_pyfunction!(bwt, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(export_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
