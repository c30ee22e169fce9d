// SPDX-License-Identifier: Apache-2.0

//! Inductive node embeddings with a max-pooling GraphSAGE encoder.
//!
//! For every target node a layered neighborhood is sampled (`fanouts[k]`
//! neighbors per frontier node, with replacement). At depth `k` each sampled
//! node aggregates its children with
//!
//! ```text
//! agg = max_u relu(W_pool · h_u + b)        (elementwise over children u)
//! h   = normalize(relu(W_k · [h_self ; agg]))
//! ```
//!
//! The last depth may replace the combine ReLU by the identity
//! ([`FinalActivation`]).
//!
//! Nodes without neighbors are padded with a sentinel whose representation
//! is the zero vector at every depth. Parameters are trained without labels
//! by a random-walk co-occurrence loss with negative sampling.

mod io;
mod model;
mod sampler;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_embeddings_csv, write_embeddings_csv, EmbedderFile, PARAMS_FORMAT_VERSION};
pub use model::{aggregate_pool, embed_forward, AggregatorParams, DepthParams, EmbeddingMatrix, FinalActivation};
pub use sampler::{sample_neighborhood, SampledNeighborhood, Slot};
pub use train::{random_walk_pairs, unsupervised_train, EmbedTrainConfig, TrainedEmbedder, UnsupervisedBatch};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("aggregator needs at least one neighbor vector")]
    EmptyNeighborhood,
    #[error("graph needs at least two nodes for unsupervised training, got {0}")]
    GraphTooSmall(usize),
    #[error("random walks produced no co-occurring pairs (graph has no edges?)")]
    NoTrainingPairs,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("parameter file: {0}")]
    Format(String),
    #[error("parameter JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which edges define a node's neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// Fan-in ∪ fan-out.
    #[default]
    Undirected,
    FanIn,
}

/// Uniform fixed-size sampling, or the whole neighborhood without randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    Sampled,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Search depth K.
    pub depth: usize,
    /// Neighbors drawn per frontier node at each depth; `fanouts.len() == depth`.
    pub fanouts: Vec<usize>,
    pub seed: u64,
    pub neighborhood: Neighborhood,
    pub mode: SampleMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            depth: 2,
            fanouts: vec![10, 5],
            seed: 0,
            neighborhood: Neighborhood::Undirected,
            mode: SampleMode::Sampled,
        }
    }
}

impl SamplerConfig {
    pub fn full(depth: usize) -> Self {
        SamplerConfig {
            depth,
            fanouts: vec![1; depth],
            mode: SampleMode::Full,
            ..SamplerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.depth == 0 {
            return Err(EmbedError::Config("depth must be at least 1".into()));
        }
        if self.fanouts.len() != self.depth {
            return Err(EmbedError::Config(format!(
                "{} fanouts given for depth {}",
                self.fanouts.len(),
                self.depth
            )));
        }
        if self.fanouts.contains(&0) {
            return Err(EmbedError::Config("fanouts must be at least 1".into()));
        }
        Ok(())
    }
}
