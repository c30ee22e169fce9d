// SPDX-License-Identifier: Apache-2.0

//! Python bindings: netlists, stimuli, the injection campaign, metrics and
//! the pipeline stages.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ffrnet_core::fault_sim::{self, CampaignResult, FitRates, Stimulus};
use ffrnet_core::metrics::{self, PredictionReport, StageTiming};
use ffrnet_core::netlist::{self, Netlist, FEATURE_NAMES};
use ffrnet_core::pipeline::{self, PipelineConfig, PipelineError};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Io { .. } => PyOSError::new_err(e.to_string()),
        PipelineError::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

#[pyclass(name = "Netlist", module = "ffrnet", frozen)]
struct PyNetlist {
    inner: Netlist,
}

#[pymethods]
impl PyNetlist {
    /// Parse `.bench` text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        netlist::parse_bench(text)
            .map(|inner| PyNetlist { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pipeline::load_netlist(&path)
            .map(|inner| PyNetlist { inner })
            .map_err(pipeline_err)
    }

    /// Cell names in declaration order.
    #[getter]
    fn cells(&self) -> Vec<String> {
        self.inner.cells().iter().map(|c| c.name.clone()).collect()
    }

    #[getter]
    fn flip_flops(&self) -> Vec<String> {
        self.inner
            .flip_flops()
            .into_iter()
            .map(|id| self.inner.cell(id).name.clone())
            .collect()
    }

    #[getter]
    fn primary_inputs(&self) -> Vec<String> {
        self.inner.primary_input_names().iter().map(|s| s.to_string()).collect()
    }

    #[getter]
    fn primary_outputs(&self) -> Vec<String> {
        self.inner.primary_output_names().iter().map(|s| s.to_string()).collect()
    }

    fn to_bench(&self) -> String {
        netlist::write_bench(&self.inner)
    }

    fn to_gml(&self) -> String {
        netlist::export_gml(&netlist::build_graph(&self.inner))
    }

    /// `(column_names, rows)`, one row per graph node.
    fn features(&self) -> (Vec<&'static str>, Vec<Vec<f64>>) {
        let g = netlist::build_graph(&self.inner);
        let x = netlist::node_features(&g);
        let rows = (0..g.node_count()).map(|v| x.row(v).to_vec()).collect();
        (FEATURE_NAMES.to_vec(), rows)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Netlist(cells={}, flip_flops={})",
            self.inner.len(),
            self.inner.flip_flops().len()
        )
    }
}

#[pyclass(name = "Stimulus", module = "ffrnet", frozen)]
struct PyStimulus {
    inner: Stimulus,
}

#[pymethods]
impl PyStimulus {
    #[staticmethod]
    #[pyo3(signature = (netlist, cycles, seed=0))]
    fn random(netlist: &PyNetlist, cycles: usize, seed: u64) -> Self {
        PyStimulus {
            inner: Stimulus::random(&netlist.inner, cycles, seed),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Stimulus::from_json(text)
            .map(|inner| PyStimulus { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn cycles(&self) -> usize {
        self.inner.cycles()
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.inner.inputs.clone()
    }

    fn __repr__(&self) -> String {
        format!("Stimulus(inputs={}, cycles={})", self.inner.inputs.len(), self.inner.cycles())
    }
}

#[pyclass(name = "CampaignResult", module = "ffrnet", frozen)]
struct PyCampaign {
    inner: CampaignResult,
}

#[pymethods]
impl PyCampaign {
    #[getter]
    fn cycles(&self) -> usize {
        self.inner.cycles
    }

    /// Sum of the per-flip-flop rates.
    #[getter]
    fn aggregate(&self) -> f64 {
        self.inner.aggregate
    }

    /// `(name, failure_count, injection_count, fit, ffr)` per flip-flop.
    fn rows(&self) -> Vec<(String, u64, u64, f64, f64)> {
        self.inner
            .per_ff
            .iter()
            .map(|r| (r.name.clone(), r.failure_count, r.injection_count, r.fit, r.ffr))
            .collect()
    }

    /// Failure rate by flip-flop name.
    fn ffr(&self) -> BTreeMap<String, f64> {
        self.inner.per_ff.iter().map(|r| (r.name.clone(), r.ffr)).collect()
    }

    fn to_csv(&self) -> String {
        fault_sim::write_campaign_csv(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.per_ff.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "CampaignResult(flip_flops={}, cycles={}, aggregate={})",
            self.inner.per_ff.len(),
            self.inner.cycles,
            self.inner.aggregate
        )
    }
}

/// Exhaustive single-flip campaign.
#[pyfunction]
#[pyo3(signature = (netlist, stimulus, fit=1.0, overrides=None))]
fn run_campaign(
    py: Python<'_>,
    netlist: &PyNetlist,
    stimulus: &PyStimulus,
    fit: f64,
    overrides: Option<BTreeMap<String, f64>>,
) -> PyResult<PyCampaign> {
    let rates = FitRates {
        default: fit,
        overrides: overrides.unwrap_or_default(),
    };
    let (n, s) = (&netlist.inner, &stimulus.inner);
    py.detach(|| fault_sim::run_campaign(n, s, &rates))
        .map(|inner| PyCampaign { inner })
        .map_err(value_err)
}

/// Exact single-cycle logical derating of flip-flop `ff`.
#[pyfunction]
fn logical_derating(netlist: &PyNetlist, ff: &str) -> PyResult<f64> {
    let id = netlist
        .inner
        .find(ff)
        .ok_or_else(|| PyValueError::new_err(format!("no cell named {ff}")))?;
    fault_sim::logical_derating_bruteforce(&netlist.inner, id).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (n_ffs, n_gates, seed=0))]
fn generate_bench(n_ffs: usize, n_gates: usize, seed: u64) -> PyResult<String> {
    ffrnet_core::generate::generate_bench(n_ffs, n_gates, seed).map_err(value_err)
}

#[pyfunction]
fn mae(targets: Vec<f64>, preds: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&targets, &preds).map_err(value_err)
}

#[pyfunction]
fn r_squared(targets: Vec<f64>, preds: Vec<f64>) -> PyResult<f64> {
    metrics::r_squared(&targets, &preds).map_err(value_err)
}

#[pyclass(name = "PipelineConfig", module = "ffrnet")]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (netlist=None, out_dir=None, seed=0, cycles=None))]
    fn new(netlist: Option<PathBuf>, out_dir: Option<PathBuf>, seed: u64, cycles: Option<usize>) -> Self {
        let mut inner = PipelineConfig {
            netlist,
            seed,
            ..PipelineConfig::default()
        };
        if let Some(d) = out_dir {
            inner.out_dir = d;
        }
        if let Some(c) = cycles {
            inner.cycles = c;
        }
        PyConfig { inner }
    }

    /// TOML or JSON configuration file.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        PipelineConfig::from_file(&path)
            .map(|inner| PyConfig { inner })
            .map_err(pipeline_err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        PipelineConfig::from_str_auto(text)
            .map(|inner| PyConfig { inner })
            .map_err(pipeline_err)
    }

    /// Override one field, e.g. `cfg.set("embed.epochs", 4)`.
    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let text = if let Ok(s) = value.extract::<String>() {
            format!("{s:?}")
        } else {
            value.repr()?.to_string().replace("True", "true").replace("False", "false")
        };
        self.inner.set(&format!("{key}={text}")).map_err(pipeline_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn netlist(&self) -> Option<PathBuf> {
        self.inner.netlist.clone()
    }

    #[setter]
    fn set_netlist(&mut self, p: Option<PathBuf>) {
        self.inner.netlist = p;
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.inner.out_dir.clone()
    }

    #[setter]
    fn set_out_dir(&mut self, p: PathBuf) {
        self.inner.out_dir = p;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, s: u64) {
        self.inner.seed = s;
    }

    #[getter]
    fn cycles(&self) -> usize {
        self.inner.cycles
    }

    #[setter]
    fn set_cycles(&mut self, c: usize) {
        self.inner.cycles = c;
    }

    fn __repr__(&self) -> String {
        format!(
            "PipelineConfig(netlist={:?}, out_dir={:?}, seed={})",
            self.inner.netlist, self.inner.out_dir, self.inner.seed
        )
    }
}

fn report_dict<'py>(
    py: Python<'py>,
    r: &PredictionReport,
    timing: Option<StageTiming>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("fold", r.fold.name())?;
    d.set_item("mae", r.mae)?;
    d.set_item("r2", r.r2)?;
    let rows: Vec<(String, &str, f64, f64)> = r
        .rows
        .iter()
        .map(|p| (p.ff_name.clone(), p.fold.name(), p.target, p.predicted))
        .collect();
    d.set_item("predictions", rows)?;
    if let Some(t) = timing {
        let td = PyDict::new(py);
        td.set_item("campaign", t.campaign)?;
        td.set_item("embed", t.embed)?;
        td.set_item("train", t.train)?;
        td.set_item("predict", t.predict)?;
        td.set_item("prediction_flow", t.prediction_flow())?;
        td.set_item("ratio", t.ratio())?;
        d.set_item("timing", td)?;
    }
    Ok(d)
}

/// Write `graph.gml` and `features.csv` for a netlist file.
#[pyfunction]
fn cmd_parse(netlist: PathBuf, out_dir: PathBuf) -> PyResult<PyNetlist> {
    pipeline::cmd_parse(&netlist, &out_dir)
        .map(|o| PyNetlist { inner: o.netlist })
        .map_err(pipeline_err)
}

#[pyfunction]
fn cmd_campaign(py: Python<'_>, config: &PyConfig) -> PyResult<PyCampaign> {
    let cfg = &config.inner;
    py.detach(|| pipeline::cmd_campaign(cfg))
        .map(|o| PyCampaign { inner: o.result })
        .map_err(pipeline_err)
}

/// Returns `(node_names, embedding_rows)`.
#[pyfunction]
fn cmd_embed(py: Python<'_>, config: &PyConfig) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let cfg = &config.inner;
    let o = py.detach(|| pipeline::cmd_embed(cfg)).map_err(pipeline_err)?;
    let rows = (0..o.names.len()).map(|i| o.embeddings.row(i).to_vec()).collect();
    Ok((o.names, rows))
}

#[pyfunction]
fn cmd_train_predict<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let (t, p) = py.detach(|| pipeline::cmd_train_predict(cfg)).map_err(pipeline_err)?;
    let d = report_dict(py, &p.report, None)?;
    d.set_item("train_loss", t.model.loss_history)?;
    Ok(d)
}

/// All stages; returns the report, stage timings and loss histories.
#[pyfunction]
fn cmd_pipeline<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let o = py.detach(|| pipeline::cmd_pipeline(cfg)).map_err(pipeline_err)?;
    let d = report_dict(py, &o.report, Some(o.timing))?;
    d.set_item("aggregate_ffr", o.campaign.aggregate)?;
    d.set_item("embed_loss", o.embed_loss)?;
    d.set_item("train_loss", o.train_loss)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (n_ffs, n_gates, path, seed=0))]
fn cmd_gen(n_ffs: usize, n_gates: usize, path: PathBuf, seed: u64) -> PyResult<()> {
    pipeline::cmd_gen(n_ffs, n_gates, seed, &path).map_err(pipeline_err)
}

#[pymodule(name = "ffrnet")]
fn ffrnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetlist>()?;
    m.add_class::<PyStimulus>()?;
    m.add_class::<PyCampaign>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(logical_derating, m)?)?;
    m.add_function(wrap_pyfunction!(generate_bench, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(cmd_parse, m)?)?;
    m.add_function(wrap_pyfunction!(cmd_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(cmd_embed, m)?)?;
    m.add_function(wrap_pyfunction!(cmd_train_predict, m)?)?;
    m.add_function(wrap_pyfunction!(cmd_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(cmd_gen, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
