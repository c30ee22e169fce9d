// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward_tree, forward_tree};
use super::sampler::{sample_with_index, NeighborIndex};
use super::{AggregatorParams, FinalActivation, EmbedError, SampledNeighborhood, SamplerConfig};
use crate::linalg::{dot, log_logistic, logistic, Adam};
use crate::netlist::{CircuitGraph, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedTrainConfig {
    pub d_pool: usize,
    pub d_emb: usize,
    pub epochs: usize,
    /// Positive pairs per minibatch.
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub learning_rate: f64,
    pub walks_per_node: usize,
    /// Nodes per walk, start included.
    pub walk_length: usize,
    pub window: usize,
    /// Negatives per minibatch, shared by all its pairs.
    pub negatives: usize,
    pub final_activation: FinalActivation,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            d_pool: 64,
            d_emb: 64,
            epochs: 10,
            batch_size: 32,
            batches_per_epoch: 8,
            learning_rate: 0.01,
            walks_per_node: 10,
            walk_length: 5,
            window: 2,
            negatives: 5,
            final_activation: FinalActivation::Identity,
            seed: 0,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let positive = [
            ("d_pool", self.d_pool),
            ("d_emb", self.d_emb),
            ("batch_size", self.batch_size),
            ("batches_per_epoch", self.batches_per_epoch),
            ("walks_per_node", self.walks_per_node),
            ("window", self.window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(EmbedError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.walk_length < 2 {
            return Err(EmbedError::Config("walk_length must be at least 2".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EmbedError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Co-occurring node pairs from uniform random walks.
///
/// Every node starts `walks_per_node` walks of up to `walk_length` nodes; a
/// walk stops early at a node without neighbors. Pairs are all `(w[i], w[j])`
/// with `0 < |i - j| <= window` and `w[i] != w[j]`.
pub fn random_walk_pairs<R: Rng>(
    g: &CircuitGraph,
    sampler: &SamplerConfig,
    cfg: &EmbedTrainConfig,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let index = NeighborIndex::new(g, sampler.neighborhood);
    walk_pairs(&index, cfg, rng)
}

fn walk_pairs<R: Rng>(index: &NeighborIndex, cfg: &EmbedTrainConfig, rng: &mut R) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut walk = Vec::with_capacity(cfg.walk_length);
    for start in 0..index.len() {
        for _ in 0..cfg.walks_per_node {
            walk.clear();
            walk.push(start);
            while walk.len() < cfg.walk_length {
                let nbrs = index.of(*walk.last().unwrap());
                if nbrs.is_empty() {
                    break;
                }
                walk.push(nbrs[rng.random_range(0..nbrs.len())]);
            }
            for i in 0..walk.len() {
                for j in i.saturating_sub(cfg.window)..(i + cfg.window + 1).min(walk.len()) {
                    if i != j && walk[i] != walk[j] {
                        pairs.push((walk[i], walk[j]));
                    }
                }
            }
        }
    }
    pairs
}

/// One minibatch with its neighborhood samples fixed.
///
/// The loss is the mean over pairs `(v, u)` of
/// `-ln σ(z_v·z_u) - Σ_n ln σ(-z_v·z_n)`, the sum running over the shared
/// negatives. Keeping the samples fixed makes the loss a deterministic
/// function of the parameters.
#[derive(Debug, Clone)]
pub struct UnsupervisedBatch {
    pub pairs: Vec<(usize, usize)>,
    pub negatives: Vec<usize>,
    trees: BTreeMap<usize, SampledNeighborhood>,
}

impl UnsupervisedBatch {
    pub fn new<R: Rng>(
        g: &CircuitGraph,
        sampler: &SamplerConfig,
        pairs: Vec<(usize, usize)>,
        negatives: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self, EmbedError> {
        sampler.validate()?;
        let index = NeighborIndex::new(g, sampler.neighborhood);
        Self::with_index(&index, sampler, pairs, negatives, rng)
    }

    fn with_index<R: Rng>(
        index: &NeighborIndex,
        sampler: &SamplerConfig,
        pairs: Vec<(usize, usize)>,
        negatives: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self, EmbedError> {
        let mut trees = BTreeMap::new();
        let ids = pairs.iter().flat_map(|&(v, u)| [v, u]).chain(negatives.iter().copied());
        for v in ids {
            if v >= index.len() {
                return Err(EmbedError::NodeOutOfRange(v));
            }
            trees
                .entry(v)
                .or_insert_with(|| sample_with_index(index, v, sampler, rng));
        }
        Ok(UnsupervisedBatch {
            pairs,
            negatives,
            trees,
        })
    }

    fn check(&self, x: &FeatureMatrix, p: &AggregatorParams) -> Result<(), EmbedError> {
        p.validate()?;
        if x.cols() != p.d_in() {
            return Err(EmbedError::DimensionMismatch(format!(
                "{} feature columns, parameters expect {}",
                x.cols(),
                p.d_in()
            )));
        }
        if let Some(t) = self.trees.values().next() {
            if t.depth() != p.depth() {
                return Err(EmbedError::DimensionMismatch(format!(
                    "samples have depth {}, parameters {}",
                    t.depth(),
                    p.depth()
                )));
            }
        }
        if self.pairs.is_empty() {
            return Err(EmbedError::NoTrainingPairs);
        }
        Ok(())
    }

    pub fn loss(&self, x: &FeatureMatrix, p: &AggregatorParams) -> Result<f64, EmbedError> {
        self.check(x, p)?;
        let z: BTreeMap<usize, Vec<f64>> = self
            .trees
            .iter()
            .map(|(&v, t)| (v, forward_tree(t, x, p).embedding().to_vec()))
            .collect();
        Ok(self.loss_from(&z, None))
    }

    /// Smallest distance of any ReLU input or max-pool gap to a tie; the loss
    /// is differentiable wherever this is positive.
    pub fn kink_margin(&self, x: &FeatureMatrix, p: &AggregatorParams) -> Result<f64, EmbedError> {
        self.check(x, p)?;
        Ok(self
            .trees
            .values()
            .map(|t| forward_tree(t, x, p).kink_margin(t, p))
            .fold(f64::INFINITY, f64::min))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        x: &FeatureMatrix,
        p: &AggregatorParams,
    ) -> Result<(f64, AggregatorParams), EmbedError> {
        self.check(x, p)?;
        let passes: BTreeMap<usize, _> = self
            .trees
            .iter()
            .map(|(&v, t)| (v, forward_tree(t, x, p)))
            .collect();
        let z: BTreeMap<usize, Vec<f64>> = passes
            .iter()
            .map(|(&v, pass)| (v, pass.embedding().to_vec()))
            .collect();
        let mut dz: BTreeMap<usize, Vec<f64>> =
            z.iter().map(|(&v, e)| (v, vec![0.0; e.len()])).collect();
        let loss = self.loss_from(&z, Some(&mut dz));
        let mut grad = p.zeros_like();
        for (v, pass) in &passes {
            let d = &dz[v];
            if d.iter().any(|&g| g != 0.0) {
                backward_tree(&self.trees[v], pass, p, d, &mut grad);
            }
        }
        Ok((loss, grad))
    }

    fn loss_from(
        &self,
        z: &BTreeMap<usize, Vec<f64>>,
        mut dz: Option<&mut BTreeMap<usize, Vec<f64>>>,
    ) -> f64 {
        let scale = 1.0 / self.pairs.len() as f64;
        let mut total = 0.0;
        for &(v, u) in &self.pairs {
            let (zv, zu) = (&z[&v], &z[&u]);
            let s = dot(zv, zu);
            total -= log_logistic(s);
            // d/ds of -ln σ(s) is -(1 - σ(s)).
            let gpos = -(1.0 - logistic(s)) * scale;
            let mut neg = Vec::with_capacity(self.negatives.len());
            for &n in &self.negatives {
                let sn = dot(zv, &z[&n]);
                total -= log_logistic(-sn);
                neg.push((n, logistic(sn) * scale));
            }
            if let Some(dz) = dz.as_deref_mut() {
                let zv = zv.clone();
                let zu = zu.clone();
                add_scaled(dz.get_mut(&v).unwrap(), gpos, &zu);
                add_scaled(dz.get_mut(&u).unwrap(), gpos, &zv);
                for (n, gn) in neg {
                    let zn = z[&n].clone();
                    add_scaled(dz.get_mut(&v).unwrap(), gn, &zn);
                    add_scaled(dz.get_mut(&n).unwrap(), gn, &zv);
                }
            }
        }
        total * scale
    }
}

fn add_scaled(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Trained encoder weights with the sampler they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEmbedder {
    pub params: AggregatorParams,
    pub sampler: SamplerConfig,
    /// Mean minibatch loss of every epoch.
    pub loss_history: Vec<f64>,
}

/// Fit aggregator parameters with the random-walk negative-sampling loss.
///
/// Single-threaded; parameters, samples and negatives all derive from
/// `train_cfg.seed`, so a fixed seed reproduces the trajectory exactly.
pub fn unsupervised_train(
    g: &CircuitGraph,
    x: &FeatureMatrix,
    sampler: &SamplerConfig,
    train_cfg: &EmbedTrainConfig,
) -> Result<TrainedEmbedder, EmbedError> {
    sampler.validate()?;
    train_cfg.validate()?;
    let n = g.node_count();
    if n < 2 {
        return Err(EmbedError::GraphTooSmall(n));
    }
    if x.rows() != n {
        return Err(EmbedError::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut params = AggregatorParams::init(
        sampler.depth,
        x.cols(),
        train_cfg.d_pool,
        train_cfg.d_emb,
        &mut rng,
    );
    params.final_activation = train_cfg.final_activation;
    let index = NeighborIndex::new(g, sampler.neighborhood);
    let mut pairs = walk_pairs(&index, train_cfg, &mut rng);
    if pairs.is_empty() {
        return Err(EmbedError::NoTrainingPairs);
    }
    pairs.shuffle(&mut rng);

    let mut opts: Vec<Adam> = params
        .tensors()
        .iter()
        .map(|t| Adam::new(t.len(), train_cfg.learning_rate))
        .collect();
    let mut cursor = 0;
    let mut history = Vec::with_capacity(train_cfg.epochs);
    for epoch in 1..=train_cfg.epochs {
        let mut sum = 0.0;
        for _ in 0..train_cfg.batches_per_epoch {
            let mut batch_pairs = Vec::with_capacity(train_cfg.batch_size);
            for _ in 0..train_cfg.batch_size {
                if cursor == pairs.len() {
                    pairs.shuffle(&mut rng);
                    cursor = 0;
                }
                batch_pairs.push(pairs[cursor]);
                cursor += 1;
            }
            let negatives = (0..train_cfg.negatives)
                .map(|_| rng.random_range(0..n))
                .collect();
            let batch =
                UnsupervisedBatch::with_index(&index, sampler, batch_pairs, negatives, &mut rng)?;
            let (loss, grad) = batch.loss_and_gradient(x, &params)?;
            if !loss.is_finite() {
                return Err(EmbedError::Divergence { epoch });
            }
            sum += loss;
            for ((opt, t), gt) in opts
                .iter_mut()
                .zip(params.tensors_mut())
                .zip(grad.tensors())
            {
                opt.step(t, gt);
            }
        }
        if !params.is_finite() {
            return Err(EmbedError::Divergence { epoch });
        }
        history.push(sum / train_cfg.batches_per_epoch as f64);
    }
    Ok(TrainedEmbedder {
        params,
        sampler: sampler.clone(),
        loss_history: history,
    })
}
