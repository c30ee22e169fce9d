// SPDX-License-Identifier: Apache-2.0

//! Regression metrics and the prediction report files.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dnn::{Fold, Prediction};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no values")]
    Empty,
    #[error("{targets} targets but {preds} predictions")]
    LengthMismatch { targets: usize, preds: usize },
    #[error("r_squared needs at least two values")]
    TooFew,
    #[error("targets have zero variance")]
    ZeroVariance,
}

fn check(targets: &[f64], preds: &[f64]) -> Result<(), MetricsError> {
    if targets.len() != preds.len() {
        return Err(MetricsError::LengthMismatch {
            targets: targets.len(),
            preds: preds.len(),
        });
    }
    if targets.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(targets: &[f64], preds: &[f64]) -> Result<f64, MetricsError> {
    check(targets, preds)?;
    let sum: f64 = targets.iter().zip(preds).map(|(t, p)| (t - p).abs()).sum();
    Ok(sum / targets.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`; negative for fits
/// worse than the mean.
pub fn r_squared(targets: &[f64], preds: &[f64]) -> Result<f64, MetricsError> {
    check(targets, preds)?;
    if targets.len() < 2 {
        return Err(MetricsError::TooFew);
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let ss_res: f64 = targets.iter().zip(preds).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Wallclock seconds of each pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTiming {
    pub campaign: f64,
    pub embed: f64,
    pub train: f64,
    pub predict: f64,
}

impl StageTiming {
    /// Embedding, regression training and prediction together.
    pub fn prediction_flow(&self) -> f64 {
        self.embed + self.train + self.predict
    }

    /// `prediction_flow / campaign`.
    pub fn ratio(&self) -> f64 {
        self.prediction_flow() / self.campaign
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub rows: Vec<Prediction>,
    /// Fold the metrics were computed on.
    pub fold: Fold,
    pub mae: f64,
    /// `None` when the fold has fewer than two rows or constant targets.
    pub r2: Option<f64>,
    pub timing: Option<StageTiming>,
}

impl PredictionReport {
    /// Score `rows` on `fold`.
    pub fn new(rows: Vec<Prediction>, fold: Fold, timing: Option<StageTiming>) -> Result<Self, MetricsError> {
        let (t, p): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.fold == fold)
            .map(|r| (r.target, r.predicted))
            .unzip();
        let mae = mae(&t, &p)?;
        let r2 = match r_squared(&t, &p) {
            Ok(v) => Some(v),
            Err(MetricsError::TooFew | MetricsError::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        Ok(PredictionReport {
            rows,
            fold,
            mae,
            r2,
            timing,
        })
    }

    fn sorted_rows(&self) -> Vec<&Prediction> {
        let mut rows: Vec<&Prediction> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.ff_name.cmp(&b.ff_name));
        rows
    }

    /// `ff_name,fold,target_ffr,predicted_ffr`, sorted by name.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("ff_name,fold,target_ffr,predicted_ffr\n");
        for r in self.sorted_rows() {
            out.push_str(&format!("{},{},{},{}\n", r.ff_name, r.fold.name(), r.target, r.predicted));
        }
        out
    }

    /// `index,ff_name,target_ffr,predicted_ffr` over the scored fold, ordered
    /// by target then name so the two series plot as a sorted curve and its
    /// prediction.
    pub fn plot_csv(&self) -> String {
        let mut rows: Vec<&Prediction> = self.rows.iter().filter(|r| r.fold == self.fold).collect();
        rows.sort_by(|a, b| a.target.total_cmp(&b.target).then_with(|| a.ff_name.cmp(&b.ff_name)));
        let mut out = String::from("index,ff_name,target_ffr,predicted_ffr\n");
        for (i, r) in rows.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{}\n", r.ff_name, r.target, r.predicted));
        }
        out
    }

    /// `fold,rows,mae,r2`.
    pub fn metrics_csv(&self) -> String {
        let n = self.rows.iter().filter(|r| r.fold == self.fold).count();
        let r2 = self.r2.map_or(String::new(), |v| v.to_string());
        format!("fold,rows,mae,r2\n{},{n},{},{r2}\n", self.fold.name(), self.mae)
    }

    /// `stage,wallclock_s`, campaign against the prediction flow.
    pub fn timing_csv(&self) -> Option<String> {
        let t = self.timing?;
        Some(format!(
            "stage,wallclock_s\ncampaign,{:.6}\nembed,{:.6}\ntrain,{:.6}\npredict,{:.6}\nprediction_flow,{:.6}\nratio,{:.6}\n",
            t.campaign,
            t.embed,
            t.train,
            t.predict,
            t.prediction_flow(),
            t.ratio()
        ))
    }
}

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct ReportError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

pub const PAIRS_FILE: &str = "predictions.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";

/// Write the report files into `dir`; returns the written paths.
pub fn emit_report(r: &PredictionReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = vec![
        (PAIRS_FILE, r.pairs_csv()),
        (PLOT_FILE, r.plot_csv()),
        (METRICS_FILE, r.metrics_csv()),
    ];
    if let Some(t) = r.timing_csv() {
        files.push((TIMING_FILE, t));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| ReportError {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(mae(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!((mae(&[0.2, 0.4, 0.9], &[0.1, 0.5, 0.8]).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(r_squared(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((r_squared(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(mae(&[], &[]), Err(MetricsError::Empty));
        assert!(matches!(mae(&[1.0], &[]), Err(MetricsError::LengthMismatch { .. })));
        assert_eq!(r_squared(&[0.5, 0.5], &[0.1, 0.2]), Err(MetricsError::ZeroVariance));
        assert_eq!(r_squared(&[0.5], &[0.1]), Err(MetricsError::TooFew));
    }

    fn pred(name: &str, fold: Fold, t: f64, p: f64) -> Prediction {
        Prediction {
            ff_name: name.into(),
            fold,
            target: t,
            predicted: p,
        }
    }

    #[test]
    fn report_scores_the_chosen_fold() {
        let rows = vec![
            pred("b", Fold::Test, 0.0, 0.1),
            pred("a", Fold::Test, 1.0, 0.9),
            pred("c", Fold::Train, 0.5, 0.0),
        ];
        let r = PredictionReport::new(rows.clone(), Fold::Test, None).unwrap();
        assert!((r.mae - 0.1).abs() < 1e-12);
        assert!(r.pairs_csv().lines().nth(1).unwrap().starts_with("a,test,"));
        assert_eq!(r.plot_csv().lines().count(), 3);
        assert!(r.timing_csv().is_none());
        let r = PredictionReport::new(rows, Fold::Train, None).unwrap();
        assert_eq!(r.r2, None);
        assert_eq!(r.mae, 0.5);
    }
}
