// SPDX-License-Identifier: Apache-2.0

//! Parameter JSON files and embedding CSV tables.

use serde::{Deserialize, Serialize};

use super::{AggregatorParams, DepthParams, FinalActivation, EmbedError, EmbeddingMatrix, SamplerConfig, TrainedEmbedder};
use crate::linalg::Matrix;

pub const PARAMS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn matrix(m: &Matrix) -> Self {
        Tensor {
            shape: vec![m.rows, m.cols],
            data: m.data.clone(),
        }
    }

    fn vector(v: &[f64]) -> Self {
        Tensor {
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    fn into_matrix(self, what: &str) -> Result<Matrix, EmbedError> {
        match self.shape[..] {
            [rows, cols] if rows * cols == self.data.len() => Ok(Matrix {
                rows,
                cols,
                data: self.data,
            }),
            _ => Err(EmbedError::Format(format!("{what}: bad matrix shape {:?}", self.shape))),
        }
    }

    fn into_vector(self, what: &str) -> Result<Vec<f64>, EmbedError> {
        match self.shape[..] {
            [len] if len == self.data.len() => Ok(self.data),
            _ => Err(EmbedError::Format(format!("{what}: bad vector shape {:?}", self.shape))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DepthTensors {
    w_pool: Tensor,
    b_pool: Tensor,
    w_combine: Tensor,
}

/// On-disk form of a trained encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderFile {
    format_version: u32,
    sampler: SamplerConfig,
    depths: Vec<DepthTensors>,
    #[serde(default)]
    final_activation: FinalActivation,
    #[serde(default)]
    loss_history: Vec<f64>,
}

impl EmbedderFile {
    pub fn from_trained(t: &TrainedEmbedder) -> Self {
        EmbedderFile {
            format_version: PARAMS_FORMAT_VERSION,
            sampler: t.sampler.clone(),
            depths: t
                .params
                .depths
                .iter()
                .map(|d| DepthTensors {
                    w_pool: Tensor::matrix(&d.w_pool),
                    b_pool: Tensor::vector(&d.b_pool),
                    w_combine: Tensor::matrix(&d.w_combine),
                })
                .collect(),
            final_activation: t.params.final_activation,
            loss_history: t.loss_history.clone(),
        }
    }

    pub fn into_trained(self) -> Result<TrainedEmbedder, EmbedError> {
        if self.format_version != PARAMS_FORMAT_VERSION {
            return Err(EmbedError::Format(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let depths = self
            .depths
            .into_iter()
            .enumerate()
            .map(|(k, d)| {
                let at = |name: &str| format!("depth {} {name}", k + 1);
                Ok(DepthParams {
                    w_pool: d.w_pool.into_matrix(&at("w_pool"))?,
                    b_pool: d.b_pool.into_vector(&at("b_pool"))?,
                    w_combine: d.w_combine.into_matrix(&at("w_combine"))?,
                })
            })
            .collect::<Result<Vec<_>, EmbedError>>()?;
        let params = AggregatorParams {
            depths,
            final_activation: self.final_activation,
        };
        params.validate()?;
        if !params.is_finite() {
            return Err(EmbedError::Format("non-finite parameter".into()));
        }
        self.sampler.validate()?;
        if self.sampler.depth != params.depth() {
            return Err(EmbedError::Format(format!(
                "sampler depth {} but {} parameter depths",
                self.sampler.depth,
                params.depth()
            )));
        }
        Ok(TrainedEmbedder {
            params,
            sampler: self.sampler,
            loss_history: self.loss_history,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("parameters serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EmbedError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn csv_err(e: csv::Error) -> EmbedError {
    EmbedError::Format(e.to_string())
}

/// `node_name,e0,..,e{d-1}`, one row per embedded node.
pub fn write_embeddings_csv(names: &[String], e: &EmbeddingMatrix) -> Result<String, EmbedError> {
    if names.len() != e.nodes.len() {
        return Err(EmbedError::DimensionMismatch(format!(
            "{} names for {} rows",
            names.len(),
            e.nodes.len()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["node_name".to_string()];
    header.extend((0..e.dim()).map(|i| format!("e{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(e.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| EmbedError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inverse of [`write_embeddings_csv`]: node names and the row matrix.
pub fn read_embeddings_csv(text: &str) -> Result<(Vec<String>, Matrix), EmbedError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    let d = header.len().saturating_sub(1);
    if header.get(0) != Some("node_name")
        || header.iter().skip(1).enumerate().any(|(i, h)| h != format!("e{i}"))
    {
        return Err(EmbedError::Format("expected header node_name,e0,..".into()));
    }
    let mut names = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        names.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| EmbedError::Format(format!("row {}: bad value {field:?}", line + 2)))?;
            data.push(v);
        }
    }
    Ok((
        names.clone(),
        Matrix {
            rows: names.len(),
            cols: d,
            data,
        },
    ))
}
