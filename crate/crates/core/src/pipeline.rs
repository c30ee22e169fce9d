// SPDX-License-Identifier: Apache-2.0

//! Stage drivers shared by the command-line tool and the Python bindings.
//!
//! Every stage reads its inputs from the configured paths or from the output
//! directory of an earlier stage, and writes its artifacts into the output
//! directory:
//!
//! | stage      | writes                                             |
//! |------------|----------------------------------------------------|
//! | parse      | `graph.gml`, `features.csv`                        |
//! | campaign   | `stimulus.json`, `campaign.csv`                    |
//! | embed      | `embedder.json`, `embeddings.csv`                  |
//! | train      | `dataset.csv`, `model.json`                        |
//! | predict    | `predictions.csv`, `plot.csv`, `metrics.csv`       |
//! | pipeline   | all of the above plus `timing.csv`                 |

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dnn::{self, Dataset, DnnError, Fold, ModelFile, Sample, TrainConfig};
use crate::fault_sim::{self, CampaignResult, FitRates, SimError, Stimulus};
use crate::generate::{generate_bench, GenError};
use crate::graphsage::{
    self, embed_forward, unsupervised_train, EmbedError, EmbedTrainConfig, EmbedderFile,
    EmbeddingMatrix, SamplerConfig, TrainedEmbedder,
};
use crate::metrics::{emit_report, MetricsError, PredictionReport, ReportError, StageTiming, TIMING_FILE};
use crate::netlist::{build_graph, export_gml, node_features, parse_bench, CircuitGraph, FeatureMatrix, Netlist, FEATURE_NAMES};

pub const GML_FILE: &str = "graph.gml";
pub const FEATURES_FILE: &str = "features.csv";
pub const STIMULUS_FILE: &str = "stimulus.json";
pub const CAMPAIGN_FILE: &str = "campaign.csv";
pub const EMBEDDER_FILE: &str = "embedder.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const DATASET_FILE: &str = "dataset.csv";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl PipelineError {
    /// Process exit code: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Io { .. } | PipelineError::Data { .. } | PipelineError::Invalid(_) => 2,
            PipelineError::Numeric(_) => 3,
        }
    }
}

impl From<ReportError> for PipelineError {
    fn from(e: ReportError) -> Self {
        PipelineError::Io {
            path: e.path,
            source: e.source,
        }
    }
}

impl From<SimError> for PipelineError {
    fn from(e: SimError) -> Self {
        PipelineError::Invalid(e.to_string())
    }
}

impl From<EmbedError> for PipelineError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Divergence { .. } => PipelineError::Numeric(e.to_string()),
            EmbedError::Config(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Invalid(e.to_string()),
        }
    }
}

impl From<DnnError> for PipelineError {
    fn from(e: DnnError) -> Self {
        match e {
            DnnError::NonFinite { .. } => PipelineError::Numeric(e.to_string()),
            DnnError::Config(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Invalid(e.to_string()),
        }
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        PipelineError::Invalid(format!("metrics: {e}"))
    }
}

impl From<GenError> for PipelineError {
    fn from(e: GenError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

/// Everything one run needs. Relative paths resolve against the working
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub netlist: Option<PathBuf>,
    /// Stimulus JSON; when absent a random stimulus of `cycles` cycles is
    /// drawn from `seed`.
    pub stimulus: Option<PathBuf>,
    pub cycles: usize,
    pub out_dir: PathBuf,
    /// Global seed. Stage seeds are derived from it, see [`PipelineConfig::resolved`].
    pub seed: u64,
    pub fit: FitRates,
    pub sampler: SamplerConfig,
    pub embed: EmbedTrainConfig,
    pub train: TrainConfig,
    /// Fold the reported metrics are computed on.
    pub metrics_fold: Fold,
    /// Embed every graph node instead of only the flip-flops.
    pub embed_all_nodes: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            netlist: None,
            stimulus: None,
            cycles: 512,
            out_dir: PathBuf::from("ffrnet-out"),
            seed: 0,
            fit: FitRates::default(),
            sampler: SamplerConfig::default(),
            embed: EmbedTrainConfig::default(),
            train: TrainConfig::default(),
            metrics_fold: Fold::Test,
            embed_all_nodes: false,
        }
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl PipelineConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn from_str_auto(text: &str) -> Result<Self, PipelineError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = read(path)?;
        Self::from_str_auto(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Set one field by dotted path, e.g. `embed.epochs=5` or
    /// `sampler.fanouts=[4, 2]`. The value is read as a TOML value and falls
    /// back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<(), PipelineError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("expected key=value, got {assignment:?}")))?;
        let key = key.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let mut root = toml::Value::try_from(&*self)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut slot = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| PipelineError::Config(format!("{key}: not a table")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| PipelineError::Config(format!("{key}: {}", e.message())))?;
        Ok(())
    }

    /// Copy with stage seeds derived from the global seed: the stimulus and
    /// the sampler use `seed`, embedding training `seed + 1`, regression
    /// training and the fold split `seed + 2`.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.sampler.seed = self.seed;
        c.embed.seed = self.seed.wrapping_add(1);
        c.train.seed = self.seed.wrapping_add(2);
        c
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.sampler.validate()?;
        self.embed.validate()?;
        self.train.validate()?;
        if self.stimulus.is_none() && self.cycles == 0 {
            return Err(PipelineError::Config("cycles must be at least 1".into()));
        }
        Ok(())
    }

    fn netlist_path(&self) -> Result<&Path, PipelineError> {
        self.netlist
            .as_deref()
            .ok_or_else(|| PipelineError::Config("no netlist given".into()))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn ensure_out_dir(&self) -> Result<(), PipelineError> {
        fs::create_dir_all(&self.out_dir).map_err(|source| PipelineError::Io {
            path: self.out_dir.clone(),
            source,
        })
    }
}

pub fn load_netlist(path: &Path) -> Result<Netlist, PipelineError> {
    parse_bench(&read(path)?).map_err(|e| data_err(path, e))
}

/// `node_name,kind,<feature columns>`.
pub fn features_csv(g: &CircuitGraph, x: &FeatureMatrix) -> String {
    let mut out = String::from("node_name,kind");
    for name in FEATURE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (v, node) in g.nodes().iter().enumerate() {
        out.push_str(&node.name);
        out.push(',');
        out.push_str(node.kind.name());
        for value in x.row(v) {
            out.push_str(&format!(",{value}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub netlist: Netlist,
    pub graph: CircuitGraph,
    pub features: FeatureMatrix,
}

/// Parse a netlist; write its graph as GML and its node features as CSV.
pub fn cmd_parse(netlist: &Path, out_dir: &Path) -> Result<ParseOutput, PipelineError> {
    let n = load_netlist(netlist)?;
    let g = build_graph(&n);
    let x = node_features(&g);
    fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write(&out_dir.join(GML_FILE), &export_gml(&g))?;
    write(&out_dir.join(FEATURES_FILE), &features_csv(&g, &x))?;
    Ok(ParseOutput {
        netlist: n,
        graph: g,
        features: x,
    })
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub result: CampaignResult,
    /// Wallclock seconds of the injection campaign alone.
    pub seconds: f64,
}

fn load_stimulus(cfg: &PipelineConfig, n: &Netlist) -> Result<Stimulus, PipelineError> {
    match &cfg.stimulus {
        Some(path) => Stimulus::from_json(&read(path)?).map_err(|e| data_err(path, e)),
        None => Ok(Stimulus::random(n, cfg.cycles, cfg.seed)),
    }
}

/// Run the exhaustive campaign; write the stimulus used and the result table.
pub fn cmd_campaign(cfg: &PipelineConfig) -> Result<CampaignOutput, PipelineError> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let path = cfg.netlist_path()?;
    let n = load_netlist(path)?;
    let s = load_stimulus(&cfg, &n)?;
    cfg.ensure_out_dir()?;
    write(&cfg.out(STIMULUS_FILE), &s.to_json())?;
    let start = Instant::now();
    let result = fault_sim::run_campaign(&n, &s, &cfg.fit)?;
    let seconds = start.elapsed().as_secs_f64();
    write(&cfg.out(CAMPAIGN_FILE), &fault_sim::write_campaign_csv(&result))?;
    Ok(CampaignOutput { result, seconds })
}

#[derive(Debug, Clone)]
pub struct EmbedOutput {
    pub embedder: TrainedEmbedder,
    pub names: Vec<String>,
    pub embeddings: EmbeddingMatrix,
    /// Wallclock seconds of training plus inference.
    pub seconds: f64,
}

/// Train the encoder on the netlist graph and embed its flip-flops (or all
/// nodes); write the parameters and the embedding table.
pub fn cmd_embed(cfg: &PipelineConfig) -> Result<EmbedOutput, PipelineError> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let n = load_netlist(cfg.netlist_path()?)?;
    let g = build_graph(&n);
    let x = node_features(&g);
    let nodes: Vec<usize> = if cfg.embed_all_nodes {
        (0..g.node_count()).collect()
    } else {
        n.flip_flops()
    };
    let start = Instant::now();
    let embedder = unsupervised_train(&g, &x, &cfg.sampler, &cfg.embed)?;
    let embeddings = embed_forward(&g, &x, &embedder.params, &embedder.sampler, &nodes)?;
    let seconds = start.elapsed().as_secs_f64();
    if !embeddings.vectors.is_finite() {
        return Err(PipelineError::Numeric("non-finite embedding".into()));
    }
    let names: Vec<String> = nodes.iter().map(|&v| g.node(v).name.clone()).collect();
    cfg.ensure_out_dir()?;
    write(&cfg.out(EMBEDDER_FILE), &EmbedderFile::from_trained(&embedder).to_json())?;
    write(
        &cfg.out(EMBEDDINGS_FILE),
        &graphsage::write_embeddings_csv(&names, &embeddings)?,
    )?;
    Ok(EmbedOutput {
        embedder,
        names,
        embeddings,
        seconds,
    })
}

/// Join campaign rates with embeddings by flip-flop name, in campaign order.
pub fn build_dataset(
    campaign: &[fault_sim::CampaignRow],
    names: &[String],
    vectors: &crate::linalg::Matrix,
) -> Result<Dataset, String> {
    let index: std::collections::HashMap<&str, usize> =
        names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let rows = campaign
        .iter()
        .map(|r| {
            let i = index
                .get(r.ff_name.as_str())
                .ok_or_else(|| format!("no embedding for flip-flop {}", r.ff_name))?;
            Ok(Sample {
                ff_name: r.ff_name.clone(),
                embedding: vectors.row(*i).to_vec(),
                target: r.ffr,
                fold: Fold::Test,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Dataset { rows })
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dataset: Dataset,
    pub model: dnn::TrainedModel,
    pub seconds: f64,
}

/// Build the dataset from the campaign and embedding tables in the output
/// directory, split it, fit the regressor; write the dataset and the model.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainOutput, PipelineError> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let cpath = cfg.out(CAMPAIGN_FILE);
    let campaign = fault_sim::read_campaign_csv(&read(&cpath)?).map_err(|e| data_err(&cpath, e))?;
    let epath = cfg.out(EMBEDDINGS_FILE);
    let (names, vectors) = graphsage::read_embeddings_csv(&read(&epath)?).map_err(|e| data_err(&epath, e))?;
    let dataset = build_dataset(&campaign, &names, &vectors).map_err(|e| data_err(&epath, e))?;
    let dataset = dnn::split_dataset(dataset, cfg.train.train_fraction, cfg.train.seed)?;
    let start = Instant::now();
    let model = dnn::train(&dataset, &cfg.train)?;
    let seconds = start.elapsed().as_secs_f64();
    write(&cfg.out(DATASET_FILE), &dnn::write_dataset_csv(&dataset)?)?;
    write(&cfg.out(MODEL_FILE), &ModelFile::new(&model, &cfg.train).to_json())?;
    Ok(TrainOutput {
        dataset,
        model,
        seconds,
    })
}

#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub report: PredictionReport,
    pub seconds: f64,
}

/// Predict every dataset row with the saved model; write the report files.
pub fn cmd_predict(cfg: &PipelineConfig) -> Result<PredictOutput, PipelineError> {
    let mpath = cfg.out(MODEL_FILE);
    let model = ModelFile::from_json(&read(&mpath)?)
        .and_then(ModelFile::into_model)
        .map_err(|e| data_err(&mpath, e))?;
    let dpath = cfg.out(DATASET_FILE);
    let dataset = dnn::read_dataset_csv(&read(&dpath)?).map_err(|e| data_err(&dpath, e))?;
    let start = Instant::now();
    let rows = dnn::predict(&model, &dataset)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = PredictionReport::new(rows, cfg.metrics_fold, None)?;
    emit_report(&report, &cfg.out_dir)?;
    Ok(PredictOutput { report, seconds })
}

pub fn cmd_train_predict(cfg: &PipelineConfig) -> Result<(TrainOutput, PredictOutput), PipelineError> {
    let t = cmd_train(cfg)?;
    let p = cmd_predict(cfg)?;
    Ok((t, p))
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub campaign: CampaignResult,
    pub report: PredictionReport,
    pub timing: StageTiming,
    pub embed_loss: Vec<f64>,
    pub train_loss: Vec<f64>,
}

/// All stages in order, plus `timing.csv` comparing the campaign with the
/// prediction flow. Everything except the timing table is a function of the
/// configuration alone.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    cmd_parse(cfg.netlist_path()?, &cfg.out_dir)?;
    let c = cmd_campaign(cfg)?;
    let e = cmd_embed(cfg)?;
    let t = cmd_train(cfg)?;
    let p = cmd_predict(cfg)?;
    let timing = StageTiming {
        campaign: c.seconds,
        embed: e.seconds,
        train: t.seconds,
        predict: p.seconds,
    };
    let mut report = p.report;
    report.timing = Some(timing);
    let text = report.timing_csv().expect("timing is set");
    write(&cfg.out(TIMING_FILE), &text)?;
    Ok(PipelineOutput {
        campaign: c.result,
        report,
        timing,
        embed_loss: e.embedder.loss_history,
        train_loss: t.model.loss_history,
    })
}

/// Write a random circuit to `path`.
pub fn cmd_gen(n_ffs: usize, n_gates: usize, seed: u64, path: &Path) -> Result<(), PipelineError> {
    let text = generate_bench(n_ffs, n_gates, seed)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write(path, &text)
}
