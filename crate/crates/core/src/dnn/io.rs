// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Dataset, Dense, DnnError, Fold, InputScaler, MlpParams, Sample, TrainConfig, TrainedModel};
use crate::linalg::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerFile {
    shape: [usize; 2],
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// On-disk form of a trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    format_version: u32,
    input_scaler: InputScaler,
    layers: Vec<LayerFile>,
    train_config: TrainConfig,
    loss_history: Vec<f64>,
}

impl ModelFile {
    pub fn new(m: &TrainedModel, cfg: &TrainConfig) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_scaler: m.scaler.clone(),
            layers: m
                .params
                .layers
                .iter()
                .map(|l| LayerFile {
                    shape: [l.w.rows, l.w.cols],
                    weights: l.w.data.clone(),
                    bias: l.b.clone(),
                })
                .collect(),
            train_config: cfg.clone(),
            loss_history: m.loss_history.clone(),
        }
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    pub fn into_model(self) -> Result<TrainedModel, DnnError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(DnnError::Format(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let [rows, cols] = l.shape;
                if l.weights.len() != rows * cols || l.bias.len() != rows {
                    return Err(DnnError::Format(format!("layer {i}: arrays do not match shape")));
                }
                Ok(Dense {
                    w: Matrix {
                        rows,
                        cols,
                        data: l.weights,
                    },
                    b: l.bias,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let params = MlpParams { layers };
        params.validate()?;
        if !params.is_finite() {
            return Err(DnnError::Format("non-finite parameter".into()));
        }
        if self.input_scaler.dim() != params.d_in() || self.input_scaler.scale.len() != params.d_in() {
            return Err(DnnError::Format("input_scaler does not match the first layer".into()));
        }
        if !self.input_scaler.is_finite() {
            return Err(DnnError::Format("input_scaler needs finite values and positive scales".into()));
        }
        Ok(TrainedModel {
            params,
            scaler: self.input_scaler,
            loss_history: self.loss_history,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DnnError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `ff_name,fold,target_ffr,e0,..`.
pub fn write_dataset_csv(d: &Dataset) -> Result<String, DnnError> {
    d.validate()?;
    let dim = d.rows.first().map_or(0, |r| r.embedding.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ff_name".to_string(), "fold".into(), "target_ffr".into()];
    header.extend((0..dim).map(|i| format!("e{i}")));
    let err = |e: csv::Error| DnnError::Format(e.to_string());
    w.write_record(&header).map_err(err)?;
    for r in &d.rows {
        let mut rec = vec![r.ff_name.clone(), r.fold.name().into(), r.target.to_string()];
        rec.extend(r.embedding.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| DnnError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_dataset_csv(text: &str) -> Result<Dataset, DnnError> {
    let err = |e: csv::Error| DnnError::Format(e.to_string());
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(err)?.clone();
    let fixed = ["ff_name", "fold", "target_ffr"];
    if header.len() < 3
        || header.iter().take(3).ne(fixed)
        || header.iter().skip(3).enumerate().any(|(i, h)| h != format!("e{i}"))
    {
        return Err(DnnError::Format("expected header ff_name,fold,target_ffr,e0,..".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let line = i + 2;
        let fold = match &rec[1] {
            "train" => Fold::Train,
            "test" => Fold::Test,
            other => return Err(DnnError::Format(format!("row {line}: unknown fold {other:?}"))),
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| DnnError::Format(format!("row {line}: bad number {s:?}")))
        };
        rows.push(Sample {
            ff_name: rec[0].to_string(),
            fold,
            target: num(&rec[2])?,
            embedding: rec.iter().skip(3).map(num).collect::<Result<_, _>>()?,
        });
    }
    let d = Dataset { rows };
    d.validate()?;
    Ok(d)
}
