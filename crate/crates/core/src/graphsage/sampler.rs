// SPDX-License-Identifier: Apache-2.0

use std::ops::Range;

use rand::Rng;

use super::{Neighborhood, SampleMode, SamplerConfig};
use crate::netlist::CircuitGraph;

/// An entry of a sampled neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Node(usize),
    /// Zero-feature stand-in for a missing neighbor.
    Sentinel,
}

/// Layered neighbor samples rooted at one node.
///
/// `layers[0]` is the root; the children of entry `i` of layer `j` are the
/// entries `children(j, i)` of layer `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledNeighborhood {
    pub layers: Vec<Vec<Slot>>,
    offsets: Vec<Vec<usize>>,
}

impl SampledNeighborhood {
    pub fn children(&self, layer: usize, i: usize) -> Range<usize> {
        self.offsets[layer][i]..self.offsets[layer][i + 1]
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Every distinct node appearing anywhere in the sample.
    pub fn closure(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .layers
            .iter()
            .flatten()
            .filter_map(|s| match s {
                Slot::Node(v) => Some(*v),
                Slot::Sentinel => None,
            })
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// Precomputed neighbor lists under one [`Neighborhood`] rule.
pub(crate) struct NeighborIndex {
    lists: Vec<Vec<usize>>,
}

impl NeighborIndex {
    pub(crate) fn new(g: &CircuitGraph, rule: Neighborhood) -> Self {
        let lists = (0..g.node_count())
            .map(|v| match rule {
                Neighborhood::Undirected => g.undirected_neighbors(v),
                Neighborhood::FanIn => g.fanin_neighbors(v),
            })
            .collect();
        NeighborIndex { lists }
    }

    pub(crate) fn of(&self, v: usize) -> &[usize] {
        &self.lists[v]
    }

    pub(crate) fn len(&self) -> usize {
        self.lists.len()
    }
}

pub(crate) fn sample_with_index<R: Rng>(
    index: &NeighborIndex,
    root: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SampledNeighborhood {
    let mut layers = vec![vec![Slot::Node(root)]];
    let mut offsets = Vec::with_capacity(cfg.depth);
    for k in 0..cfg.depth {
        let frontier = &layers[k];
        let mut next = Vec::with_capacity(frontier.len() * cfg.fanouts[k]);
        let mut offs = Vec::with_capacity(frontier.len() + 1);
        offs.push(0);
        for slot in frontier {
            let nbrs: &[usize] = match slot {
                Slot::Node(v) => index.of(*v),
                Slot::Sentinel => &[],
            };
            match (cfg.mode, nbrs.is_empty()) {
                (SampleMode::Sampled, false) => next.extend(
                    (0..cfg.fanouts[k]).map(|_| Slot::Node(nbrs[rng.random_range(0..nbrs.len())])),
                ),
                (SampleMode::Sampled, true) => {
                    next.extend(std::iter::repeat_n(Slot::Sentinel, cfg.fanouts[k]))
                }
                (SampleMode::Full, false) => next.extend(nbrs.iter().map(|&u| Slot::Node(u))),
                (SampleMode::Full, true) => next.push(Slot::Sentinel),
            }
            offs.push(next.len());
        }
        offsets.push(offs);
        layers.push(next);
    }
    SampledNeighborhood { layers, offsets }
}

/// Sample the K-layer neighborhood of `v`.
///
/// In sampled mode every frontier entry gets exactly `fanouts[k]` children,
/// drawn uniformly with replacement; entries without neighbors get sentinel
/// copies. In full mode the whole neighbor list is used.
pub fn sample_neighborhood<R: Rng>(
    g: &CircuitGraph,
    v: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> SampledNeighborhood {
    let index = NeighborIndex::new(g, cfg.neighborhood);
    sample_with_index(&index, v, cfg, rng)
}
