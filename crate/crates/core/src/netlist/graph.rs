// SPDX-License-Identifier: Apache-2.0

use super::{CellId, GateKind, Netlist};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub name: String,
    pub kind: GateKind,
}

/// Directed graph over the cells of a circuit, edges oriented driver → reader.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CircuitGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<(usize, usize)>,
    fanin: Vec<Vec<usize>>,
    fanout: Vec<Vec<usize>>,
}

impl CircuitGraph {
    /// Builds a graph from a node list and edge list.
    ///
    /// # Panics
    ///
    /// If an edge endpoint is out of range.
    pub fn new(nodes: Vec<GraphNode>, edges: Vec<(usize, usize)>) -> Self {
        let n = nodes.len();
        let mut fanin = vec![Vec::new(); n];
        let mut fanout = vec![Vec::new(); n];
        for &(src, dst) in &edges {
            assert!(src < n && dst < n, "edge ({src}, {dst}) out of range for {n} nodes");
            fanout[src].push(dst);
            fanin[dst].push(src);
        }
        CircuitGraph {
            nodes,
            edges,
            fanin,
            fanout,
        }
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> &GraphNode {
        &self.nodes[v]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Drivers of `v`, one entry per fan-in pin.
    pub fn fanin(&self, v: usize) -> &[usize] {
        &self.fanin[v]
    }

    /// Readers of `v`, one entry per pin they read `v` on.
    pub fn fanout(&self, v: usize) -> &[usize] {
        &self.fanout[v]
    }

    /// Distinct fan-in ∪ fan-out of `v`, ascending.
    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        let mut nb: Vec<usize> = self.fanin[v]
            .iter()
            .chain(&self.fanout[v])
            .copied()
            .collect();
        nb.sort_unstable();
        nb.dedup();
        nb
    }

    /// Distinct drivers of `v`, ascending.
    pub fn fanin_neighbors(&self, v: usize) -> Vec<usize> {
        let mut nb = self.fanin[v].clone();
        nb.sort_unstable();
        nb.dedup();
        nb
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Copy of the graph without `removed`; remaining nodes keep their
    /// relative order.
    pub fn without_nodes(&self, removed: &[usize]) -> CircuitGraph {
        let mut keep = vec![true; self.nodes.len()];
        for &r in removed {
            keep[r] = false;
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if keep[i] {
                remap[i] = nodes.len();
                nodes.push(node.clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|(s, d)| keep[*s] && keep[*d])
            .map(|&(s, d)| (remap[s], remap[d]))
            .collect();
        CircuitGraph::new(nodes, edges)
    }
}

/// One node per cell in declaration order; one edge per fan-in pin.
pub fn build_graph(n: &Netlist) -> CircuitGraph {
    let nodes = n
        .cells()
        .iter()
        .map(|c| GraphNode {
            name: c.name.clone(),
            kind: c.kind,
        })
        .collect();
    let edges = n
        .cells()
        .iter()
        .enumerate()
        .flat_map(|(reader, c)| c.fanin.iter().map(move |&driver: &CellId| (driver, reader)))
        .collect();
    CircuitGraph::new(nodes, edges)
}
