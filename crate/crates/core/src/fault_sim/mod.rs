// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate two-valued simulation and SEU fault injection.
//!
//! Each cycle the simulator drives the primary inputs, presents the stored
//! DFF values, evaluates combinational cells in topological order, samples
//! the observed outputs and finally loads every DFF from its data pin.
//! An SEU inverts one stored bit right after the load boundary that enters
//! the injection cycle.

mod campaign;
mod derating;
mod io;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{CellId, GateKind, Netlist};

pub use campaign::{
    aggregate_ffr, run_campaign, run_campaign_in_order, CampaignResult, DeratingFactors, FitRates,
    FlipFlopResult,
};
pub use derating::{logical_derating_bruteforce, MAX_CONE_INPUTS};
pub use io::{read_campaign_csv, write_campaign_csv, CampaignRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("stimulus is empty: at least one cycle is required")]
    EmptyStimulus,
    #[error("cycle {cycle}: vector assigns {got} inputs, expected {expected}")]
    WidthMismatch {
        cycle: usize,
        expected: usize,
        got: usize,
    },
    #[error("stimulus names `{0}`, which is not a primary input")]
    UnknownInput(String),
    #[error("stimulus does not assign primary input `{0}`")]
    MissingInput(String),
    #[error("initial state names `{0}`, which is not a flip-flop")]
    UnknownFlipFlop(String),
    #[error("observe list names `{0}`, which is not a primary output")]
    UnknownOutput(String),
    #[error("cell {0} is not a flip-flop")]
    NotAFlipFlop(CellId),
    #[error("injection cycle {cycle} outside [0, {cycles})")]
    CycleOutOfRange { cycle: usize, cycles: usize },
    #[error("circuit has no flip-flops to inject into")]
    NoFlipFlops,
    #[error("trace shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("injection order is not a permutation of all (flip-flop, cycle) pairs: {0}")]
    BadOrder(String),
    #[error("fan-in cone has {inputs} free inputs, above the enumeration limit of {limit}")]
    ConeTooLarge { inputs: usize, limit: usize },
    #[error("invalid FIT rate for `{name}`: {value}")]
    InvalidFit { name: String, value: f64 },
    #[error("bad stimulus bit {0:?}: expected '0' or '1'")]
    BadBit(char),
    #[error("malformed campaign CSV: {0}")]
    Csv(String),
    #[error("stimulus JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Input workload for a simulation run.
///
/// `vectors[t][i]` is the value of primary input `inputs[i]` at cycle `t`.
/// Flip-flops absent from `initial_state` start at 0. When `observe` is set
/// only those primary outputs (by net name) are compared.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stimulus {
    pub inputs: Vec<String>,
    pub vectors: Vec<Vec<bool>>,
    pub initial_state: BTreeMap<String, bool>,
    pub observe: Option<Vec<String>>,
}

impl Stimulus {
    /// Uniform random vectors over the netlist's primary inputs.
    pub fn random(n: &Netlist, cycles: usize, seed: u64) -> Stimulus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<String> = n.primary_input_names().iter().map(|s| s.to_string()).collect();
        let vectors = (0..cycles)
            .map(|_| (0..inputs.len()).map(|_| rng.random::<bool>()).collect())
            .collect();
        Stimulus {
            inputs,
            vectors,
            ..Stimulus::default()
        }
    }

    pub fn cycles(&self) -> usize {
        self.vectors.len()
    }
}

/// Observed primary-output values, one vector per cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenTrace {
    pub outputs: Vec<Vec<bool>>,
}

impl GoldenTrace {
    pub fn cycles(&self) -> usize {
        self.outputs.len()
    }
}

/// A single SEU: invert flip-flop `ff` (a cell id) entering cycle `cycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InjectionSpec {
    pub ff: CellId,
    pub cycle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Masked,
    Failure,
}

/// Straight-line evaluation program for one netlist and one stimulus.
pub(crate) struct Simulator {
    kinds: Vec<GateKind>,
    /// Combinational cells in evaluation order, with their fan-in ranges.
    ops: Vec<(CellId, usize, usize)>,
    fanin: Vec<CellId>,
    pis: Vec<CellId>,
    ffs: Vec<CellId>,
    ff_data: Vec<CellId>,
    observed: Vec<CellId>,
    /// Primary-input values per cycle, in netlist PI order.
    pi_values: Vec<Vec<bool>>,
    init: Vec<bool>,
}

impl Simulator {
    pub(crate) fn new(n: &Netlist, s: &Stimulus) -> Result<Simulator, SimError> {
        if s.vectors.is_empty() {
            return Err(SimError::EmptyStimulus);
        }
        let pis = n.primary_inputs().to_vec();
        let mut column = vec![None; pis.len()];
        for (col, name) in s.inputs.iter().enumerate() {
            let pos = n
                .find(name)
                .and_then(|id| pis.iter().position(|&p| p == id))
                .ok_or_else(|| SimError::UnknownInput(name.clone()))?;
            column[pos] = Some(col);
        }
        let column: Vec<usize> = column
            .into_iter()
            .zip(&pis)
            .map(|(c, &p)| c.ok_or_else(|| SimError::MissingInput(n.cell(p).name.clone())))
            .collect::<Result<_, _>>()?;
        let mut pi_values = Vec::with_capacity(s.vectors.len());
        for (cycle, v) in s.vectors.iter().enumerate() {
            if v.len() != s.inputs.len() {
                return Err(SimError::WidthMismatch {
                    cycle,
                    expected: s.inputs.len(),
                    got: v.len(),
                });
            }
            pi_values.push(column.iter().map(|&c| v[c]).collect());
        }

        let ffs = n.flip_flops();
        let mut init = vec![false; ffs.len()];
        for (name, &bit) in &s.initial_state {
            let slot = n
                .find(name)
                .and_then(|id| ffs.iter().position(|&f| f == id))
                .ok_or_else(|| SimError::UnknownFlipFlop(name.clone()))?;
            init[slot] = bit;
        }

        let observed = match &s.observe {
            None => n.primary_outputs().to_vec(),
            Some(names) => {
                let po_names = n.primary_output_names();
                names
                    .iter()
                    .map(|name| {
                        po_names
                            .iter()
                            .position(|p| p == name)
                            .map(|i| n.primary_outputs()[i])
                            .ok_or_else(|| SimError::UnknownOutput(name.clone()))
                    })
                    .collect::<Result<_, _>>()?
            }
        };

        let mut ops = Vec::new();
        let mut fanin = Vec::new();
        for &id in n.topo_order() {
            let cell = n.cell(id);
            if cell.kind.is_combinational() {
                let start = fanin.len();
                fanin.extend_from_slice(&cell.fanin);
                ops.push((id, start, fanin.len()));
            }
        }
        Ok(Simulator {
            kinds: n.cells().iter().map(|c| c.kind).collect(),
            ops,
            fanin,
            pis,
            ff_data: ffs.iter().map(|&f| n.cell(f).fanin[0]).collect(),
            ffs,
            observed,
            pi_values,
            init,
        })
    }

    pub(crate) fn cycles(&self) -> usize {
        self.pi_values.len()
    }

    pub(crate) fn flip_flops(&self) -> &[CellId] {
        &self.ffs
    }

    pub(crate) fn initial_state(&self) -> Vec<bool> {
        self.init.clone()
    }

    pub(crate) fn scratch(&self) -> Vec<bool> {
        vec![false; self.kinds.len()]
    }

    /// Run one cycle: `state` holds the stored DFF bits on entry and the
    /// loaded bits on return. Observed outputs are written to `out`.
    pub(crate) fn step(&self, values: &mut [bool], state: &mut [bool], cycle: usize, out: &mut [bool]) {
        for (&pi, &v) in self.pis.iter().zip(&self.pi_values[cycle]) {
            values[pi] = v;
        }
        for (&ff, &v) in self.ffs.iter().zip(state.iter()) {
            values[ff] = v;
        }
        for &(id, start, end) in &self.ops {
            let pins = &self.fanin[start..end];
            let v = self.kinds[id].eval(pins.iter().map(|&p| values[p]));
            values[id] = v;
        }
        for (o, &cell) in out.iter_mut().zip(&self.observed) {
            *o = values[cell];
        }
        for (s, &d) in state.iter_mut().zip(&self.ff_data) {
            *s = values[d];
        }
    }

    pub(crate) fn width(&self) -> usize {
        self.observed.len()
    }

    /// Full run from the initial state, optionally inverting one stored bit.
    pub(crate) fn run(&self, flip: Option<(usize, usize)>) -> GoldenTrace {
        let mut values = self.scratch();
        let mut state = self.initial_state();
        let mut outputs = Vec::with_capacity(self.cycles());
        for cycle in 0..self.cycles() {
            if let Some((slot, at)) = flip {
                if at == cycle {
                    state[slot] = !state[slot];
                }
            }
            let mut out = vec![false; self.width()];
            self.step(&mut values, &mut state, cycle, &mut out);
            outputs.push(out);
        }
        GoldenTrace { outputs }
    }

    pub(crate) fn ff_slot(&self, ff: CellId) -> Option<usize> {
        self.ffs.iter().position(|&f| f == ff)
    }
}

/// Fault-free simulation of `s` on `n`.
pub fn simulate_golden(n: &Netlist, s: &Stimulus) -> Result<GoldenTrace, SimError> {
    Ok(Simulator::new(n, s)?.run(None))
}

/// Simulation with the stored bit of `inj.ff` inverted entering `inj.cycle`.
pub fn simulate_with_seu(
    n: &Netlist,
    s: &Stimulus,
    inj: InjectionSpec,
) -> Result<GoldenTrace, SimError> {
    let sim = Simulator::new(n, s)?;
    let slot = sim.ff_slot(inj.ff).ok_or(SimError::NotAFlipFlop(inj.ff))?;
    if inj.cycle >= sim.cycles() {
        return Err(SimError::CycleOutOfRange {
            cycle: inj.cycle,
            cycles: sim.cycles(),
        });
    }
    Ok(sim.run(Some((slot, inj.cycle))))
}

/// Failure iff any observed output differs in any cycle.
pub fn classify_outcome(golden: &GoldenTrace, faulty: &GoldenTrace) -> Result<Outcome, SimError> {
    if golden.cycles() != faulty.cycles() {
        return Err(SimError::ShapeMismatch(format!(
            "{} vs {} cycles",
            golden.cycles(),
            faulty.cycles()
        )));
    }
    let mut failed = false;
    for (t, (g, f)) in golden.outputs.iter().zip(&faulty.outputs).enumerate() {
        if g.len() != f.len() {
            return Err(SimError::ShapeMismatch(format!(
                "cycle {t}: width {} vs {}",
                g.len(),
                f.len()
            )));
        }
        failed |= g != f;
    }
    Ok(if failed {
        Outcome::Failure
    } else {
        Outcome::Masked
    })
}
