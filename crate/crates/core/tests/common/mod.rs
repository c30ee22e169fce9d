// SPDX-License-Identifier: Apache-2.0

//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use ffrnet::fault_sim::Stimulus;
use ffrnet::netlist::{parse_bench, GateKind, Netlist};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap()
}

pub fn fixture(name: &str) -> Netlist {
    parse_bench(&fixture_text(name)).unwrap()
}

/// Every `.bench` fixture, sorted by file name.
pub fn all_fixtures() -> Vec<(String, Netlist)> {
    let mut names: Vec<String> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".bench"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), fixture(&n))).collect()
}

/// A plain by-name simulator. It shares nothing with the library simulator
/// beyond the parsed cell list: every call starts from the initial state,
/// evaluates signals recursively and applies its own gate truth tables.
pub struct NaiveSim<'a> {
    n: &'a Netlist,
    kinds: HashMap<&'a str, (GateKind, Vec<&'a str>)>,
}

impl<'a> NaiveSim<'a> {
    pub fn new(n: &'a Netlist) -> Self {
        let kinds = n
            .cells()
            .iter()
            .enumerate()
            .map(|(id, c)| (c.name.as_str(), (c.kind, n.fanin_names(id))))
            .collect();
        NaiveSim { n, kinds }
    }

    fn value(
        &self,
        name: &'a str,
        inputs: &HashMap<&str, bool>,
        state: &HashMap<&str, bool>,
        memo: &mut HashMap<&'a str, bool>,
    ) -> bool {
        if let Some(&v) = memo.get(name) {
            return v;
        }
        let (kind, fanin) = &self.kinds[name];
        let ins: Vec<bool> = match kind {
            GateKind::Input => vec![inputs[name]],
            GateKind::Dff => vec![state[name]],
            _ => fanin.iter().map(|f| self.value(f, inputs, state, memo)).collect(),
        };
        let ones = ins.iter().filter(|&&b| b).count();
        let v = match kind {
            GateKind::Input | GateKind::Dff | GateKind::Buf | GateKind::Output => ins[0],
            GateKind::Not => !ins[0],
            GateKind::And => ones == ins.len(),
            GateKind::Nand => ones != ins.len(),
            GateKind::Or => ones > 0,
            GateKind::Nor => ones == 0,
            GateKind::Xor => ones % 2 == 1,
            GateKind::Xnor => ones % 2 == 0,
        };
        memo.insert(name, v);
        v
    }

    /// Output trace, optionally with the stored bit of flip-flop `flip.0`
    /// inverted at the start of cycle `flip.1`.
    pub fn run(&self, s: &Stimulus, flip: Option<(&str, usize)>) -> Vec<Vec<bool>> {
        let ffs: Vec<&str> = self
            .n
            .cells()
            .iter()
            .filter(|c| c.kind == GateKind::Dff)
            .map(|c| c.name.as_str())
            .collect();
        let outs: Vec<&str> = self
            .n
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == GateKind::Output)
            .filter(|(id, _)| match &s.observe {
                Some(o) => o.iter().any(|net| net == self.n.fanin_names(*id)[0]),
                None => true,
            })
            .map(|(_, c)| c.name.as_str())
            .collect();
        let mut state: HashMap<&str, bool> = ffs
            .iter()
            .map(|&f| (f, s.initial_state.get(f).copied().unwrap_or(false)))
            .collect();
        let mut trace = Vec::new();
        for (t, vec) in s.vectors.iter().enumerate() {
            if let Some((ff, c)) = flip {
                if c == t {
                    let v = state[ff];
                    state.insert(ff, !v);
                }
            }
            let inputs: HashMap<&str, bool> =
                s.inputs.iter().map(|n| n.as_str()).zip(vec.iter().copied()).collect();
            let mut memo = HashMap::new();
            trace.push(outs.iter().map(|o| self.value(o, &inputs, &state, &mut memo)).collect());
            let next: HashMap<&str, bool> = ffs
                .iter()
                .map(|&f| {
                    let d = self.kinds[f].1[0];
                    (f, self.value(d, &inputs, &state, &mut memo))
                })
                .collect();
            state = next;
        }
        trace
    }

    /// Failure count of every flip-flop, in declaration order.
    pub fn failure_counts(&self, s: &Stimulus) -> Vec<(String, usize)> {
        self.n
            .flip_flops()
            .into_iter()
            .map(|id| {
                let name = self.n.cell(id).name.as_str();
                let failures = (0..s.cycles())
                    .filter(|&c| self.run(s, Some((name, c))) != self.run(s, None))
                    .count();
                (name.to_string(), failures)
            })
            .collect()
    }
}
pub mod gradcheck;
