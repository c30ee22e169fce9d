// SPDX-License-Identifier: Apache-2.0

mod common;

use common::gradcheck::{fixture_graph, graphsage_gradient_check};
use ffrnet::graphsage::{
    aggregate_pool, embed_forward, random_walk_pairs, sample_neighborhood, unsupervised_train,
    AggregatorParams, DepthParams, EmbedTrainConfig, FinalActivation, SampleMode, SamplerConfig, Slot,
};
use ffrnet::linalg::{dot, Matrix};
use ffrnet::netlist::{build_graph, node_features, parse_bench, CircuitGraph, GateKind, GraphNode};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..100 {
        let worst = graphsage_gradient_check(seed);
        assert!(worst < 1e-4, "seed {seed}: relative error {worst}");
    }
}

#[test]
fn aggregator_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = AggregatorParams::init(1, 8, 16, 4, &mut rng);
    let mut vs: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let reference = aggregate_pool(&vs, &p, 1).unwrap();
    for _ in 0..1000 {
        vs.shuffle(&mut rng);
        assert_eq!(aggregate_pool(&vs, &p, 1).unwrap(), reference);
    }
}

#[test]
fn aggregator_single_neighbor_identity() {
    let p = AggregatorParams {
        depths: vec![DepthParams {
            w_pool: Matrix::identity(4),
            b_pool: vec![0.0; 4],
            w_combine: Matrix::zeros(4, 8),
        }],
        final_activation: FinalActivation::Relu,
    };
    let h = vec![0.0, 0.25, 3.5, 1e-300];
    assert_eq!(aggregate_pool(std::slice::from_ref(&h), &p, 1).unwrap(), h);
}

proptest! {
    #[test]
    fn aggregator_is_monotone(seed in 0u64..1000, bump in 0.0f64..2.0) {
        // With identity pooling the transformed coordinate is the input itself.
        let p = AggregatorParams {
            depths: vec![DepthParams {
                w_pool: Matrix::identity(3),
                b_pool: vec![0.0; 3],
                w_combine: Matrix::zeros(3, 6),
            }],
            final_activation: FinalActivation::Relu,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let before = aggregate_pool(&vs, &p, 1).unwrap();
        let (i, j) = (rng.random_range(0..4), rng.random_range(0..3));
        vs[i][j] += bump;
        let after = aggregate_pool(&vs, &p, 1).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a >= b);
        }
    }
}

#[test]
fn inductive_under_deletion_outside_closure() {
    let g = fixture_graph();
    let x = node_features(&g);
    let p = AggregatorParams::init(2, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(2));
    let cfg = SamplerConfig::full(2);
    let all: Vec<usize> = (0..g.node_count()).collect();
    let before = embed_forward(&g, &x, &p, &cfg, &all).unwrap();
    for v in 0..g.node_count() {
        let closure = sample_neighborhood(&g, v, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).closure();
        let outside: Vec<usize> = all.iter().copied().filter(|u| !closure.contains(u)).collect();
        if outside.is_empty() {
            continue;
        }
        let h = g.without_nodes(&outside);
        let kept = closure.clone();
        let hx = x.select_rows(&kept);
        let nv = kept.iter().position(|&u| u == v).unwrap();
        let after = embed_forward(&h, &hx, &p, &cfg, &[nv]).unwrap();
        assert_eq!(after.row(0), before.row(v), "node {v}");
    }
}

#[test]
fn twin_nodes_embed_identically() {
    // b and c are both inputs feeding only z.
    let g = build_graph(&parse_bench("INPUT(b)\nINPUT(c)\nOUTPUT(z)\nz = AND(b, c)").unwrap());
    let x = node_features(&g);
    let p = AggregatorParams::init(2, x.cols(), 8, 6, &mut ChaCha8Rng::seed_from_u64(4));
    let e = embed_forward(&g, &x, &p, &SamplerConfig::full(2), &[0, 1]).unwrap();
    assert_eq!(e.row(0), e.row(1));
}

fn two_cliques(a: usize, b: usize) -> CircuitGraph {
    let kinds = [GateKind::And, GateKind::Or, GateKind::Xor, GateKind::Dff, GateKind::Nand];
    let nodes = (0..a + b)
        .map(|i| GraphNode {
            name: format!("n{i}"),
            kind: kinds[i % kinds.len()],
        })
        .collect();
    let mut edges = Vec::new();
    for (lo, hi) in [(0, a), (a, a + b)] {
        for i in lo..hi {
            for j in lo..hi {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
    }
    CircuitGraph::new(nodes, edges)
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let d = dot(u, u).sqrt() * dot(v, v).sqrt();
    if d == 0.0 {
        0.0
    } else {
        dot(u, v) / d
    }
}

#[test]
fn two_cliques_separate_after_training() {
    let g = two_cliques(5, 7);
    let x = node_features(&g);
    let sampler = SamplerConfig::default();
    let cfg = EmbedTrainConfig {
        d_pool: 16,
        d_emb: 16,
        epochs: 30,
        batches_per_epoch: 10,
        learning_rate: 0.001,
        seed: 1,
        ..EmbedTrainConfig::default()
    };
    let t = unsupervised_train(&g, &x, &sampler, &cfg).unwrap();
    assert!(t.loss_history.iter().all(|l| l.is_finite()));
    assert!(t.loss_history.last() < t.loss_history.first());
    let all: Vec<usize> = (0..12).collect();
    let e = embed_forward(&g, &x, &t.params, &sampler, &all).unwrap();
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for i in 0..12 {
        for j in i + 1..12 {
            let c = cosine(e.row(i), e.row(j));
            if (i < 5) == (j < 5) {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    let (intra, inter) = (intra / ni as f64, inter / nx as f64);
    assert!(intra > inter, "intra {intra} inter {inter}");
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let g = fixture_graph();
    let x = node_features(&g);
    let cfg = EmbedTrainConfig {
        d_pool: 8,
        d_emb: 8,
        epochs: 15,
        seed: 3,
        ..EmbedTrainConfig::default()
    };
    let a = unsupervised_train(&g, &x, &SamplerConfig::default(), &cfg).unwrap();
    let b = unsupervised_train(&g, &x, &SamplerConfig::default(), &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.loss_history.last() < a.loss_history.first());
}

#[test]
fn fanin_only_walks_follow_edges() {
    let g = fixture_graph();
    let sampler = SamplerConfig {
        neighborhood: ffrnet::graphsage::Neighborhood::FanIn,
        ..SamplerConfig::default()
    };
    let pairs = random_walk_pairs(&g, &sampler, &EmbedTrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(!pairs.is_empty());
}

#[test]
fn sampled_mode_exact_fanout() {
    let g = fixture_graph();
    let cfg = SamplerConfig {
        mode: SampleMode::Sampled,
        ..SamplerConfig::default()
    };
    for v in 0..g.node_count() {
        let s = sample_neighborhood(&g, v, &cfg, &mut ChaCha8Rng::seed_from_u64(v as u64));
        assert_eq!(s.layers[1].len(), 10);
        assert_eq!(s.layers[2].len(), 50);
        assert!(s.layers[1].iter().all(|s| matches!(s, Slot::Node(_))));
    }
}
