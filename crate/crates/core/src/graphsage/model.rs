// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{sample_with_index, NeighborIndex};
use super::{EmbedError, SampledNeighborhood, SamplerConfig, Slot};
use crate::linalg::{dot, norm, Matrix};
use crate::netlist::{CircuitGraph, FeatureMatrix};

/// Trainable weights of one search depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthParams {
    /// `d_pool × d_in`.
    pub w_pool: Matrix,
    /// `d_pool`.
    pub b_pool: Vec<f64>,
    /// `d_out × (d_in + d_pool)`.
    pub w_combine: Matrix,
}

impl DepthParams {
    pub fn d_in(&self) -> usize {
        self.w_pool.cols
    }

    pub fn d_pool(&self) -> usize {
        self.w_pool.rows
    }

    pub fn d_out(&self) -> usize {
        self.w_combine.rows
    }

    fn zeros_like(&self) -> Self {
        DepthParams {
            w_pool: Matrix::zeros(self.w_pool.rows, self.w_pool.cols),
            b_pool: vec![0.0; self.b_pool.len()],
            w_combine: Matrix::zeros(self.w_combine.rows, self.w_combine.cols),
        }
    }
}

/// Activation of the last combine step, applied before normalization.
///
/// Hidden depths always use ReLU. A ReLU on the last depth keeps every
/// embedding non-negative, and the negative-sampling loss then tends to
/// drive all of them to zero, so the default is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalActivation {
    #[default]
    Identity,
    Relu,
}

/// Pooling-aggregator and combine weights for depths `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorParams {
    pub depths: Vec<DepthParams>,
    #[serde(default)]
    pub final_activation: FinalActivation,
}

impl AggregatorParams {
    /// Glorot-initialized weights with zero biases. Depth 1 reads `d_in`
    /// features; every depth pools into `d_pool` and emits `d_emb` values.
    pub fn init<R: Rng>(depth: usize, d_in: usize, d_pool: usize, d_emb: usize, rng: &mut R) -> Self {
        let mut depths = Vec::with_capacity(depth);
        let mut d = d_in;
        for _ in 0..depth {
            depths.push(DepthParams {
                w_pool: Matrix::glorot(d_pool, d, rng),
                b_pool: vec![0.0; d_pool],
                w_combine: Matrix::glorot(d_emb, d + d_pool, rng),
            });
            d = d_emb;
        }
        AggregatorParams {
            depths,
            final_activation: FinalActivation::default(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AggregatorParams {
            depths: self.depths.iter().map(DepthParams::zeros_like).collect(),
            final_activation: self.final_activation,
        }
    }

    pub fn depth(&self) -> usize {
        self.depths.len()
    }

    pub fn d_in(&self) -> usize {
        self.depths.first().map_or(0, DepthParams::d_in)
    }

    pub fn d_emb(&self) -> usize {
        self.depths.last().map_or(0, DepthParams::d_out)
    }

    /// Flat views over every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.depths
            .iter()
            .flat_map(|d| [&d.w_pool.data[..], &d.b_pool[..], &d.w_combine.data[..]])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.depths
            .iter_mut()
            .flat_map(|d| {
                [
                    &mut d.w_pool.data[..],
                    &mut d.b_pool[..],
                    &mut d.w_combine.data[..],
                ]
            })
            .collect()
    }

    /// Whether depth `k` (1-based) applies ReLU after combining.
    pub(crate) fn combine_relu(&self, k: usize) -> bool {
        k < self.depth() || self.final_activation == FinalActivation::Relu
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Dimensions must chain from depth to depth.
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.depths.is_empty() {
            return Err(EmbedError::DimensionMismatch("no depths".into()));
        }
        for (k, d) in self.depths.iter().enumerate() {
            if d.b_pool.len() != d.d_pool()
                || d.w_combine.cols != d.d_in() + d.d_pool()
                || d.w_pool.data.len() != d.w_pool.rows * d.w_pool.cols
                || d.w_combine.data.len() != d.w_combine.rows * d.w_combine.cols
            {
                return Err(EmbedError::DimensionMismatch(format!(
                    "depth {} tensors are inconsistent",
                    k + 1
                )));
            }
            if k > 0 && d.d_in() != self.depths[k - 1].d_out() {
                return Err(EmbedError::DimensionMismatch(format!(
                    "depth {} reads {} values but depth {} emits {}",
                    k + 1,
                    d.d_in(),
                    k,
                    self.depths[k - 1].d_out()
                )));
            }
        }
        Ok(())
    }
}

/// `relu(W_pool · h + b)`.
fn pool_transform(p: &DepthParams, h: &[f64], out: &mut [f64]) {
    p.w_pool.matvec(h, out);
    for (o, b) in out.iter_mut().zip(&p.b_pool) {
        *o = (*o + b).max(0.0);
    }
}

/// Max-pooling aggregator at depth `k` (1-based).
///
/// Returns the elementwise maximum of `relu(W_pool · h + b)` over all
/// neighbor vectors `h`.
pub fn aggregate_pool(
    neighbor_vecs: &[Vec<f64>],
    p: &AggregatorParams,
    k: usize,
) -> Result<Vec<f64>, EmbedError> {
    let depth = k
        .checked_sub(1)
        .and_then(|i| p.depths.get(i))
        .ok_or_else(|| EmbedError::DimensionMismatch(format!("no depth {k}")))?;
    if neighbor_vecs.is_empty() {
        return Err(EmbedError::EmptyNeighborhood);
    }
    let mut out = vec![f64::NEG_INFINITY; depth.d_pool()];
    let mut t = vec![0.0; depth.d_pool()];
    for h in neighbor_vecs {
        if h.len() != depth.d_in() {
            return Err(EmbedError::DimensionMismatch(format!(
                "neighbor vector has {} values, depth {k} expects {}",
                h.len(),
                depth.d_in()
            )));
        }
        pool_transform(depth, h, &mut t);
        for (o, &v) in out.iter_mut().zip(&t) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Intermediate values of one depth over one layer of a sample tree.
struct LayerPass {
    /// Pool pre-activations of every child (`children × d_pool`).
    pool_pre: Vec<f64>,
    /// Pooled vector per entry (`entries × d_pool`).
    agg: Vec<f64>,
    /// Winning child (index into the child layer) per entry and pool unit.
    argmax: Vec<usize>,
    /// Combine pre-activations (`entries × d_out`).
    pre: Vec<f64>,
    /// Norm of the activated combine output per entry.
    norms: Vec<f64>,
}

/// Forward state of one sample tree, kept for backpropagation.
pub(crate) struct TreePass {
    /// `h[k][j]`: representations of layer `j` after depth `k`, flat.
    h: Vec<Vec<Vec<f64>>>,
    /// `passes[k - 1][j]`.
    passes: Vec<Vec<LayerPass>>,
}

impl TreePass {
    pub(crate) fn embedding(&self) -> &[f64] {
        let k = self.h.len() - 1;
        &self.h[k][0]
    }

    /// Distance to the nearest point where the tree output is not
    /// differentiable: the smallest `|pre-activation|` of any ReLU, and the
    /// smallest gap between the winning and the best strictly smaller child
    /// of any max-pool unit.
    pub(crate) fn kink_margin(&self, tree: &SampledNeighborhood, p: &AggregatorParams) -> f64 {
        let mut m = f64::INFINITY;
        for (k, layer_passes) in self.passes.iter().enumerate() {
            let relu = p.combine_relu(k + 1);
            for (j, lp) in layer_passes.iter().enumerate() {
                let entries = &tree.layers[j];
                let d_pool = lp.agg.len() / entries.len();
                let d_out = lp.pre.len() / entries.len();
                for &v in &lp.pool_pre {
                    m = m.min(v.abs());
                }
                for (i, slot) in entries.iter().enumerate() {
                    if *slot == Slot::Sentinel {
                        continue;
                    }
                    if relu {
                        for &v in &lp.pre[i * d_out..(i + 1) * d_out] {
                            m = m.min(v.abs());
                        }
                    }
                    for u in 0..d_pool {
                        let best = lp.agg[i * d_pool + u];
                        for c in tree.children(j, i) {
                            let v = lp.pool_pre[c * d_pool + u].max(0.0);
                            if v < best {
                                m = m.min(best - v);
                            }
                        }
                    }
                }
            }
        }
        m
    }
}

pub(crate) fn forward_tree(
    tree: &SampledNeighborhood,
    x: &FeatureMatrix,
    p: &AggregatorParams,
) -> TreePass {
    let depth = p.depth();
    let d0 = x.cols();
    let h0: Vec<Vec<f64>> = tree
        .layers
        .iter()
        .map(|layer| {
            let mut flat = vec![0.0; layer.len() * d0];
            for (i, slot) in layer.iter().enumerate() {
                if let Slot::Node(v) = slot {
                    flat[i * d0..(i + 1) * d0].copy_from_slice(x.row(*v));
                }
            }
            flat
        })
        .collect();
    let mut h = vec![h0];
    let mut passes = Vec::with_capacity(depth);

    for k in 1..=depth {
        let dp = &p.depths[k - 1];
        let (d_in, d_pool, d_out) = (dp.d_in(), dp.d_pool(), dp.d_out());
        let relu = p.combine_relu(k);
        let prev = &h[k - 1];
        let mut hk = Vec::with_capacity(depth - k + 1);
        let mut pk = Vec::with_capacity(depth - k + 1);
        for j in 0..=depth - k {
            let entries = &tree.layers[j];
            let children = &tree.layers[j + 1];
            let mut pool_pre = vec![0.0; children.len() * d_pool];
            for c in 0..children.len() {
                let out = &mut pool_pre[c * d_pool..(c + 1) * d_pool];
                dp.w_pool.matvec(&prev[j + 1][c * d_in..(c + 1) * d_in], out);
                for (o, b) in out.iter_mut().zip(&dp.b_pool) {
                    *o += b;
                }
            }
            let mut agg = vec![0.0; entries.len() * d_pool];
            let mut argmax = vec![0usize; entries.len() * d_pool];
            let mut pre = vec![0.0; entries.len() * d_out];
            let mut norms = vec![0.0; entries.len()];
            let mut out_h = vec![0.0; entries.len() * d_out];
            let mut concat = vec![0.0; d_in + d_pool];
            for (i, slot) in entries.iter().enumerate() {
                let range = tree.children(j, i);
                let a = &mut agg[i * d_pool..(i + 1) * d_pool];
                let am = &mut argmax[i * d_pool..(i + 1) * d_pool];
                a.fill(f64::NEG_INFINITY);
                for c in range {
                    let t = &pool_pre[c * d_pool..(c + 1) * d_pool];
                    for u in 0..d_pool {
                        let v = t[u].max(0.0);
                        if v > a[u] {
                            a[u] = v;
                            am[u] = c;
                        }
                    }
                }
                if *slot == Slot::Sentinel {
                    continue;
                }
                concat[..d_in].copy_from_slice(&prev[j][i * d_in..(i + 1) * d_in]);
                concat[d_in..].copy_from_slice(a);
                let z = &mut pre[i * d_out..(i + 1) * d_out];
                dp.w_combine.matvec(&concat, z);
                let o = &mut out_h[i * d_out..(i + 1) * d_out];
                for (ov, &zv) in o.iter_mut().zip(z.iter()) {
                    *ov = if relu { zv.max(0.0) } else { zv };
                }
                let n = norm(o);
                norms[i] = n;
                if n > 0.0 {
                    for ov in o.iter_mut() {
                        *ov /= n;
                    }
                }
            }
            hk.push(out_h);
            pk.push(LayerPass {
                pool_pre,
                agg,
                argmax,
                pre,
                norms,
            });
        }
        h.push(hk);
        passes.push(pk);
    }
    TreePass { h, passes }
}

/// Accumulate into `grad` the gradient of `dz · embedding` through one tree.
pub(crate) fn backward_tree(
    tree: &SampledNeighborhood,
    pass: &TreePass,
    p: &AggregatorParams,
    dz: &[f64],
    grad: &mut AggregatorParams,
) {
    let depth = p.depth();
    // dh[j] holds the gradient w.r.t. h[k][j] for the depth being processed.
    let mut dh: Vec<Vec<f64>> = vec![dz.to_vec()];
    for k in (1..=depth).rev() {
        let dp = &p.depths[k - 1];
        let gp = &mut grad.depths[k - 1];
        let (d_in, d_pool, d_out) = (dp.d_in(), dp.d_pool(), dp.d_out());
        let relu = p.combine_relu(k);
        let prev = &pass.h[k - 1];
        let need_input_grad = k > 1;
        let mut dprev: Vec<Vec<f64>> = (0..=depth - k + 1)
            .map(|j| vec![0.0; if need_input_grad { tree.layers[j].len() * d_in } else { 0 }])
            .collect();
        let mut dpre = vec![0.0; d_out];
        let mut dconcat = vec![0.0; d_in + d_pool];
        let mut concat = vec![0.0; d_in + d_pool];
        for j in 0..=depth - k {
            let lp = &pass.passes[k - 1][j];
            let hk = &pass.h[k][j];
            let children = tree.layers[j + 1].len();
            let mut dpool = vec![0.0; children * d_pool];
            for (i, slot) in tree.layers[j].iter().enumerate() {
                if *slot == Slot::Sentinel || lp.norms[i] == 0.0 {
                    continue;
                }
                let g = &dh[j][i * d_out..(i + 1) * d_out];
                if g.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let hv = &hk[i * d_out..(i + 1) * d_out];
                let proj = dot(hv, g);
                let n = lp.norms[i];
                let z = &lp.pre[i * d_out..(i + 1) * d_out];
                for u in 0..d_out {
                    dpre[u] = if !relu || z[u] > 0.0 {
                        (g[u] - hv[u] * proj) / n
                    } else {
                        0.0
                    };
                }
                concat[..d_in].copy_from_slice(&prev[j][i * d_in..(i + 1) * d_in]);
                concat[d_in..].copy_from_slice(&lp.agg[i * d_pool..(i + 1) * d_pool]);
                gp.w_combine.add_outer(&dpre, &concat);
                dconcat.fill(0.0);
                dp.w_combine.matvec_t_add(&dpre, &mut dconcat);
                if need_input_grad {
                    for (a, b) in dprev[j][i * d_in..(i + 1) * d_in].iter_mut().zip(&dconcat[..d_in]) {
                        *a += b;
                    }
                }
                let am = &lp.argmax[i * d_pool..(i + 1) * d_pool];
                for u in 0..d_pool {
                    dpool[am[u] * d_pool + u] += dconcat[d_in + u];
                }
            }
            for c in 0..children {
                let dp_c = &mut dpool[c * d_pool..(c + 1) * d_pool];
                let pre_c = &lp.pool_pre[c * d_pool..(c + 1) * d_pool];
                let mut any = false;
                for u in 0..d_pool {
                    if pre_c[u] <= 0.0 {
                        dp_c[u] = 0.0;
                    } else if dp_c[u] != 0.0 {
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                for (b, d) in gp.b_pool.iter_mut().zip(dp_c.iter()) {
                    *b += d;
                }
                if tree.layers[j + 1][c] == Slot::Sentinel {
                    continue;
                }
                let hc = &prev[j + 1][c * d_in..(c + 1) * d_in];
                gp.w_pool.add_outer(dp_c, hc);
                if need_input_grad {
                    dp.w_pool
                        .matvec_t_add(dp_c, &mut dprev[j + 1][c * d_in..(c + 1) * d_in]);
                }
            }
        }
        dh = dprev;
    }
}

/// Embedding rows for a set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    /// Graph node id of every row.
    pub nodes: Vec<usize>,
    pub vectors: Matrix,
}

impl EmbeddingMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols
    }
}

pub(crate) fn node_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

/// Embed `nodes` with trained parameters.
///
/// Each node samples its neighborhood from its own random stream derived
/// from `(cfg.seed, node)`, so the result does not depend on which other
/// nodes are requested or on the thread schedule.
pub fn embed_forward(
    g: &CircuitGraph,
    x: &FeatureMatrix,
    p: &AggregatorParams,
    cfg: &SamplerConfig,
    nodes: &[usize],
) -> Result<EmbeddingMatrix, EmbedError> {
    cfg.validate()?;
    p.validate()?;
    if cfg.depth != p.depth() {
        return Err(EmbedError::DimensionMismatch(format!(
            "sampler depth {} but {} parameter depths",
            cfg.depth,
            p.depth()
        )));
    }
    if x.rows() != g.node_count() {
        return Err(EmbedError::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            g.node_count()
        )));
    }
    if x.cols() != p.d_in() {
        return Err(EmbedError::DimensionMismatch(format!(
            "{} feature columns, parameters expect {}",
            x.cols(),
            p.d_in()
        )));
    }
    if let Some(&bad) = nodes.iter().find(|&&v| v >= g.node_count()) {
        return Err(EmbedError::NodeOutOfRange(bad));
    }
    let index = NeighborIndex::new(g, cfg.neighborhood);
    let d = p.d_emb();
    let rows: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&v| {
            let mut rng = node_rng(cfg.seed, v);
            let tree = sample_with_index(&index, v, cfg, &mut rng);
            forward_tree(&tree, x, p).embedding().to_vec()
        })
        .collect();
    let mut vectors = Matrix::zeros(nodes.len(), d);
    for (i, r) in rows.iter().enumerate() {
        vectors.row_mut(i).copy_from_slice(r);
    }
    Ok(EmbeddingMatrix {
        nodes: nodes.to_vec(),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_graph, node_features, parse_bench};

    fn identity_params(d: usize) -> AggregatorParams {
        AggregatorParams {
            depths: vec![DepthParams {
                w_pool: Matrix::identity(d),
                b_pool: vec![0.0; d],
                w_combine: Matrix::zeros(d, 2 * d),
            }],
            final_activation: FinalActivation::Relu,
        }
    }

    #[test]
    fn single_non_negative_neighbor_passes_through() {
        let p = identity_params(3);
        let h = vec![0.5, 0.0, 2.0];
        assert_eq!(aggregate_pool(std::slice::from_ref(&h), &p, 1).unwrap(), h);
    }

    #[test]
    fn two_neighbor_example() {
        let p = identity_params(2);
        let out = aggregate_pool(&[vec![1.0, -2.0], vec![0.0, 3.0]], &p, 1).unwrap();
        assert_eq!(out, vec![1.0, 3.0]);
    }

    #[test]
    fn aggregator_errors() {
        let p = identity_params(2);
        assert!(matches!(aggregate_pool(&[], &p, 1), Err(EmbedError::EmptyNeighborhood)));
        assert!(matches!(
            aggregate_pool(&[vec![1.0]], &p, 1),
            Err(EmbedError::DimensionMismatch(_))
        ));
        assert!(aggregate_pool(&[vec![1.0, 1.0]], &p, 2).is_err());
        assert!(aggregate_pool(&[vec![1.0, 1.0]], &p, 0).is_err());
    }

    fn fixture() -> (CircuitGraph, FeatureMatrix) {
        let g = build_graph(
            &parse_bench("INPUT(a)\nq = DFF(d)\nd = AND(a,q)\nOUTPUT(z)\nz = BUF(q)").unwrap(),
        );
        let x = node_features(&g);
        (g, x)
    }

    #[test]
    fn zero_features_give_zero_rows() {
        let (g, x) = fixture();
        let zeros = FeatureMatrix::zeros(x.rows(), x.cols());
        let p = AggregatorParams::init(2, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(1));
        let e = embed_forward(&g, &zeros, &p, &SamplerConfig::default(), &[0, 1, 2, 3, 4]).unwrap();
        assert!(e.vectors.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rows_are_unit_norm() {
        let (g, x) = fixture();
        let p = AggregatorParams::init(2, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(3));
        let e = embed_forward(&g, &x, &p, &SamplerConfig::default(), &[0, 1, 2, 3, 4]).unwrap();
        for i in 0..5 {
            let n = norm(e.row(i));
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-6, "row {i} norm {n}");
        }
    }

    #[test]
    fn forward_is_independent_of_request_set() {
        let (g, x) = fixture();
        let p = AggregatorParams::init(2, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(3));
        let cfg = SamplerConfig::default();
        let all = embed_forward(&g, &x, &p, &cfg, &[0, 1, 2, 3, 4]).unwrap();
        let one = embed_forward(&g, &x, &p, &cfg, &[3]).unwrap();
        assert_eq!(one.row(0), all.row(3));
    }

    #[test]
    fn forward_rejects_mismatches() {
        let (g, x) = fixture();
        let p = AggregatorParams::init(2, 4, 8, 6, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(embed_forward(&g, &x, &p, &SamplerConfig::default(), &[0]).is_err());
        let p = AggregatorParams::init(1, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(embed_forward(&g, &x, &p, &SamplerConfig::default(), &[0]).is_err());
        let p = AggregatorParams::init(2, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(matches!(
            embed_forward(&g, &x, &p, &SamplerConfig::default(), &[9]),
            Err(EmbedError::NodeOutOfRange(9))
        ));
    }
}
