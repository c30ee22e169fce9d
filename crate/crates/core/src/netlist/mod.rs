// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlists and the directed circuit graph derived from them.
//!
//! A [`Netlist`] is the validated cell table read from a `.bench` file. It is
//! turned into a [`CircuitGraph`] (one node per cell, one edge per fan-in pin,
//! oriented driver to reader), from which a structural [`FeatureMatrix`] is
//! derived. Graphs can be written to and read back from GML.

mod bench;
mod features;
mod gml;
mod graph;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bench::{parse_bench, write_bench, ParseError, ParseErrorKind};
pub use features::{node_features, FeatureMatrix, FEATURE_COLUMNS, FEATURE_NAMES};
pub use gml::{export_gml, import_gml, GmlError};
pub use graph::{build_graph, CircuitGraph, GraphNode};

/// Index of a cell in declaration order. Graph node ids use the same numbering.
pub type CellId = usize;

/// Cell kinds of the `.bench` dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    Input,
    Output,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Dff,
}

impl GateKind {
    /// All kinds, in one-hot column order.
    pub const ALL: [GateKind; 11] = [
        GateKind::Input,
        GateKind::Output,
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Dff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Input => "INPUT",
            GateKind::Output => "OUTPUT",
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Dff => "DFF",
        }
    }

    /// Position of this kind in the one-hot feature block.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_sequential(self) -> bool {
        self == GateKind::Dff
    }

    /// True for kinds computed from their fan-in within the same cycle.
    pub fn is_combinational(self) -> bool {
        !matches!(self, GateKind::Input | GateKind::Dff)
    }

    /// Whether `n` fan-in pins is legal for this kind.
    pub fn accepts_arity(self, n: usize) -> bool {
        match self {
            GateKind::Input => n == 0,
            GateKind::Output | GateKind::Not | GateKind::Buf | GateKind::Dff => n == 1,
            _ => n >= 2,
        }
    }

    /// Evaluate a combinational kind. `Input` and `Dff` have no logic function
    /// here and pass their first operand through.
    pub fn eval<I: IntoIterator<Item = bool>>(self, inputs: I) -> bool {
        let mut it = inputs.into_iter();
        match self {
            GateKind::And => it.all(|b| b),
            GateKind::Nand => !it.all(|b| b),
            GateKind::Or => it.any(|b| b),
            GateKind::Nor => !it.any(|b| b),
            GateKind::Xor => it.fold(false, |acc, b| acc ^ b),
            GateKind::Xnor => !it.fold(false, |acc, b| acc ^ b),
            GateKind::Not => !it.next().unwrap_or(false),
            GateKind::Buf | GateKind::Output | GateKind::Dff | GateKind::Input => {
                it.next().unwrap_or(false)
            }
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = ();

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, ()> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

/// One entry of the cell table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub name: String,
    pub kind: GateKind,
    pub fanin: Vec<CellId>,
}

/// A validated gate-level netlist.
///
/// Cells are kept in declaration order. `OUTPUT(z)` declares a dedicated
/// output cell named [`output_cell_name`]`("z")` whose single fan-in is `z`.
/// The combinational subgraph (every edge not leaving a DFF) is acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Netlist {
    cells: Vec<Cell>,
    index: HashMap<String, CellId>,
    primary_inputs: Vec<CellId>,
    primary_outputs: Vec<CellId>,
    topo_order: Vec<CellId>,
}

/// Name given to the output cell created by `OUTPUT(net)`.
pub fn output_cell_name(net: &str) -> String {
    format!("OUTPUT({net})")
}

impl Netlist {
    /// Assembles a netlist from already-resolved cells. Callers must have
    /// checked arity, name uniqueness and combinational acyclicity.
    pub(crate) fn from_validated(cells: Vec<Cell>, topo_order: Vec<CellId>) -> Self {
        let index = cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i))
            .collect();
        let primary_inputs = ids_of_kind(&cells, GateKind::Input);
        let primary_outputs = ids_of_kind(&cells, GateKind::Output);
        Netlist {
            cells,
            index,
            primary_inputs,
            primary_outputs,
            topo_order,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<CellId> {
        self.index.get(name).copied()
    }

    pub fn fanin_names(&self, id: CellId) -> Vec<&str> {
        self.cells[id]
            .fanin
            .iter()
            .map(|&f| self.cells[f].name.as_str())
            .collect()
    }

    /// INPUT cells in declaration order.
    pub fn primary_inputs(&self) -> &[CellId] {
        &self.primary_inputs
    }

    /// OUTPUT cells in declaration order.
    pub fn primary_outputs(&self) -> &[CellId] {
        &self.primary_outputs
    }

    pub fn primary_input_names(&self) -> Vec<&str> {
        self.primary_inputs
            .iter()
            .map(|&i| self.cells[i].name.as_str())
            .collect()
    }

    /// Names of the nets observed by the OUTPUT cells (`z` for `OUTPUT(z)`).
    pub fn primary_output_names(&self) -> Vec<&str> {
        self.primary_outputs
            .iter()
            .map(|&o| self.cells[self.cells[o].fanin[0]].name.as_str())
            .collect()
    }

    /// DFF cells in declaration order.
    pub fn flip_flops(&self) -> Vec<CellId> {
        ids_of_kind(&self.cells, GateKind::Dff)
    }

    /// All cells ordered so that every combinational fan-in precedes its reader.
    pub fn topo_order(&self) -> &[CellId] {
        &self.topo_order
    }
}

fn ids_of_kind(cells: &[Cell], kind: GateKind) -> Vec<CellId> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == kind)
        .map(|(i, _)| i)
        .collect()
}

/// Outcome of ordering a cell set along its combinational edges.
pub(crate) enum CombOrder {
    Acyclic(Vec<CellId>),
    /// A cell lying on a combinational cycle.
    Cycle(CellId),
}

/// Depth-first topological sort over combinational edges (edges leaving a DFF
/// are ignored). Roots are visited in declaration order, so both the order
/// and any reported cycle member are deterministic.
pub(crate) fn comb_topo_order(kinds: &[GateKind], fanin: &[Vec<CellId>]) -> CombOrder {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = kinds.len();
    let mut mark = vec![Mark::New; n];
    let mut order = Vec::with_capacity(n);
    let mut stack: Vec<(CellId, usize)> = Vec::new();
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        mark[root] = Mark::Active;
        stack.push((root, 0));
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            // A DFF's data pin is sampled at the clock edge, not combinationally,
            // so the DFF itself is a source of the combinational order.
            let pins: &[CellId] = if kinds[v] == GateKind::Dff {
                &[]
            } else {
                &fanin[v]
            };
            if top.1 < pins.len() {
                let u = pins[top.1];
                top.1 += 1;
                match mark[u] {
                    Mark::New => {
                        mark[u] = Mark::Active;
                        stack.push((u, 0));
                    }
                    Mark::Active => return CombOrder::Cycle(u),
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                order.push(v);
                stack.pop();
            }
        }
    }
    CombOrder::Acyclic(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip_case_insensitively() {
        for k in GateKind::ALL {
            assert_eq!(k.name().parse::<GateKind>(), Ok(k));
            assert_eq!(k.name().to_lowercase().parse::<GateKind>(), Ok(k));
        }
        assert!("MUX".parse::<GateKind>().is_err());
    }

    #[test]
    fn one_hot_indices_are_dense() {
        for (i, k) in GateKind::ALL.iter().enumerate() {
            assert_eq!(k.index(), i);
        }
    }

    #[test]
    fn truth_tables() {
        let cases = [(false, false), (false, true), (true, false), (true, true)];
        for (a, b) in cases {
            assert_eq!(GateKind::And.eval([a, b]), a && b);
            assert_eq!(GateKind::Nand.eval([a, b]), !(a && b));
            assert_eq!(GateKind::Or.eval([a, b]), a || b);
            assert_eq!(GateKind::Nor.eval([a, b]), !(a || b));
            assert_eq!(GateKind::Xor.eval([a, b]), a ^ b);
            assert_eq!(GateKind::Xnor.eval([a, b]), !(a ^ b));
        }
        assert!(GateKind::Xor.eval([true, true, true]));
        assert!(GateKind::Not.eval([false]));
        assert!(GateKind::Buf.eval([true]));
    }
}
