// SPDX-License-Identifier: Apache-2.0

//! Central-difference gradient checks for both trained models.

use ffrnet::dnn::{mse_loss_and_gradient, MlpParams};
use ffrnet::graphsage::{AggregatorParams, SamplerConfig, UnsupervisedBatch};
use ffrnet::netlist::{build_graph, node_features, parse_bench, CircuitGraph, FeatureMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points closer than this to a ReLU kink or a max-pool tie are redrawn:
/// the losses have no derivative there.
const KINK_MARGIN: f64 = 1e-3;

const FIXTURE: &str = "\
INPUT(a)
INPUT(b)
q = DFF(d)
p = DFF(e)
d = AND(a, q)
e = XOR(p, d, b)
OUTPUT(z)
z = NAND(q, e)
";

pub fn fixture_graph() -> CircuitGraph {
    build_graph(&parse_bench(FIXTURE).unwrap())
}

/// Central-difference check of every parameter at one random point; returns
/// the worst relative error. Points closer than `KINK_MARGIN` to a ReLU or
/// max-pool tie are redrawn, since the loss has no derivative there.
pub fn graphsage_gradient_check(seed: u64) -> f64 {
    let g = fixture_graph();
    let x = node_features(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(worst) = try_point(&g, &x, seed, &mut rng) {
            return worst;
        }
    }
}

fn try_point(g: &CircuitGraph, x: &FeatureMatrix, seed: u64, rng: &mut ChaCha8Rng) -> Option<f64> {
    let sampler = SamplerConfig {
        depth: 2,
        fanouts: vec![3, 2],
        seed,
        ..SamplerConfig::default()
    };
    let mut p = AggregatorParams::init(2, x.cols(), 6, 5, rng);
    for d in &mut p.depths {
        for b in &mut d.b_pool {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let n = g.node_count();
    let pairs = (0..4)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    let negatives = (0..3).map(|_| rng.random_range(0..n)).collect();
    let batch = UnsupervisedBatch::new(g, &sampler, pairs, negatives, rng).unwrap();
    if batch.kink_margin(x, &p).unwrap() < KINK_MARGIN {
        return None;
    }
    let (_, grad) = batch.loss_and_gradient(x, &p).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let analytic: Vec<f64> = grad.tensors().concat();
    let mut idx = 0;
    let sizes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
    for (t, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = p.tensors()[t][i];
            p.tensors_mut()[t][i] = orig + h;
            let up = batch.loss(x, &p).unwrap();
            p.tensors_mut()[t][i] = orig - h;
            let down = batch.loss(x, &p).unwrap();
            p.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            idx += 1;
        }
    }
    Some(worst)
}

/// Worst relative error between the analytic MSE gradient and central
/// differences at one random configuration. Configurations with a hidden
/// ReLU input closer than `KINK_MARGIN` to zero are redrawn.
pub fn dnn_gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d = rng.random_range(2..6);
        let mut p = MlpParams::init(&[d, 5, 4, 3, 1], &mut rng);
        for t in p.tensors_mut() {
            for v in t {
                *v += rng.random_range(-0.2..0.2);
            }
        }
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        let xr: Vec<&[f64]> = xs.iter().map(|x| &x[..]).collect();
        if p.kink_margin(&xr) < KINK_MARGIN {
            continue;
        }
        let (_, grad) = mse_loss_and_gradient(&p, &xr, &ys).unwrap();
        let analytic = grad.tensors().concat();
        let sizes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut idx = 0;
        for (t, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let orig = p.tensors()[t][i];
                p.tensors_mut()[t][i] = orig + h;
                let up = mse_loss_and_gradient(&p, &xr, &ys).unwrap().0;
                p.tensors_mut()[t][i] = orig - h;
                let down = mse_loss_and_gradient(&p, &xr, &ys).unwrap().0;
                p.tensors_mut()[t][i] = orig;
                let n = (up - down) / (2.0 * h);
                let a = analytic[idx];
                worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
                idx += 1;
            }
        }
        return worst;
    }
}

