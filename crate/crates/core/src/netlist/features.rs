// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use super::{CircuitGraph, GateKind};

/// Number of feature columns: 11 one-hot kinds, in-degree, out-degree,
/// normalized topological level, sequential flag.
pub const FEATURE_COLUMNS: usize = 15;

pub const FEATURE_NAMES: [&str; FEATURE_COLUMNS] = [
    "is_input",
    "is_output",
    "is_and",
    "is_nand",
    "is_or",
    "is_nor",
    "is_xor",
    "is_xnor",
    "is_not",
    "is_buf",
    "is_dff",
    "in_degree",
    "out_degree",
    "level",
    "sequential",
];

const COL_IN_DEGREE: usize = 11;
const COL_OUT_DEGREE: usize = 12;
const COL_LEVEL: usize = 13;
const COL_SEQUENTIAL: usize = 14;

/// Dense row-major node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols));
        FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix restricted to `keep`, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: keep.len(),
            cols: self.cols,
            data: keep.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

/// Longest combinational distance of every node from a PI or DFF output.
///
/// Edges leaving a DFF do not count as combinational. Nodes trapped on a
/// combinational cycle (only possible for graphs imported from GML) get the
/// largest level reached by the rest of the graph.
pub(crate) fn topological_levels(g: &CircuitGraph) -> Vec<usize> {
    let n = g.node_count();
    let is_source = |v: usize| matches!(g.node(v).kind, GateKind::Input | GateKind::Dff);
    let mut pending: Vec<usize> = (0..n)
        .map(|v| if is_source(v) { 0 } else { g.fanin(v).len() })
        .collect();
    let mut level = vec![0usize; n];
    let mut done = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| pending[v] == 0).collect();
    while let Some(v) = queue.pop_front() {
        done[v] = true;
        for &w in g.fanout(v) {
            if is_source(w) {
                continue;
            }
            level[w] = level[w].max(level[v] + 1);
            pending[w] -= 1;
            if pending[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    let reached = level.iter().copied().max().unwrap_or(0);
    for v in 0..n {
        if !done[v] {
            level[v] = reached;
        }
    }
    level
}

/// Structural features per node: one-hot kind, in/out degree, topological
/// level divided by `max(1, max level)`, and a sequential flag.
pub fn node_features(g: &CircuitGraph) -> FeatureMatrix {
    let levels = topological_levels(g);
    let max_level = levels.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut x = FeatureMatrix::zeros(g.node_count(), FEATURE_COLUMNS);
    for (v, &level) in levels.iter().enumerate() {
        let kind = g.node(v).kind;
        let row = x.row_mut(v);
        row[kind.index()] = 1.0;
        row[COL_IN_DEGREE] = g.fanin(v).len() as f64;
        row[COL_OUT_DEGREE] = g.fanout(v).len() as f64;
        row[COL_LEVEL] = level as f64 / max_level;
        row[COL_SEQUENTIAL] = if kind.is_sequential() { 1.0 } else { 0.0 };
    }
    x
}
