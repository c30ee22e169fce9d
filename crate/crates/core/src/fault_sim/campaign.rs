// SPDX-License-Identifier: Apache-2.0

//! Exhaustive SEU campaign: one injection per (flip-flop, cycle) pair.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InjectionSpec, SimError, Simulator, Stimulus};
use crate::netlist::{CellId, Netlist};

/// Temporal, logical and functional derating of one flip-flop.
///
/// For state-flip SEUs the upset is latched by construction, so `tdr` is 1.
/// The campaign observes logical and functional masking jointly; the measured
/// propagation fraction is carried in `fdr` and `ldr` stays at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeratingFactors {
    pub tdr: f64,
    pub ldr: f64,
    pub fdr: f64,
}

impl DeratingFactors {
    pub fn empirical(failures: u64, injections: u64) -> Self {
        DeratingFactors {
            tdr: 1.0,
            ldr: 1.0,
            fdr: failures as f64 / injections as f64,
        }
    }

    pub fn product(&self) -> f64 {
        self.tdr * self.ldr * self.fdr
    }
}

/// Raw per-flip-flop soft-error rates in FIT units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRates {
    pub default: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Default for FitRates {
    fn default() -> Self {
        FitRates {
            default: 1.0,
            overrides: BTreeMap::new(),
        }
    }
}

impl FitRates {
    pub fn uniform(rate: f64) -> Self {
        FitRates {
            default: rate,
            overrides: BTreeMap::new(),
        }
    }

    pub fn rate(&self, ff: &str) -> f64 {
        self.overrides.get(ff).copied().unwrap_or(self.default)
    }

    fn validate(&self, n: &Netlist) -> Result<(), SimError> {
        let bad = |name: &str, value: f64| !(value.is_finite() && value >= 0.0) || name.is_empty();
        if bad("default", self.default) {
            return Err(SimError::InvalidFit {
                name: "default".into(),
                value: self.default,
            });
        }
        for (name, &value) in &self.overrides {
            let is_ff = n
                .find(name)
                .is_some_and(|id| n.cell(id).kind.is_sequential());
            if !is_ff || bad(name, value) {
                return Err(SimError::InvalidFit {
                    name: name.clone(),
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipFlopResult {
    pub name: String,
    pub node: CellId,
    pub failure_count: u64,
    pub injection_count: u64,
    pub fit: f64,
    pub derating: DeratingFactors,
    /// `fit × failure_count / injection_count`.
    pub ffr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub cycles: usize,
    pub per_ff: Vec<FlipFlopResult>,
    /// Sum of the per-flip-flop rates.
    pub aggregate: f64,
}

/// Circuit-level failure rate: the sum of per-flip-flop rates.
pub fn aggregate_ffr(c: &CampaignResult) -> f64 {
    c.per_ff.iter().map(|r| r.ffr).sum()
}

/// Golden reference kept for resuming faulty runs mid-stimulus.
struct Reference {
    /// Stored DFF bits entering each cycle, plus the final state.
    states: Vec<Vec<bool>>,
    outputs: Vec<Vec<bool>>,
}

fn reference_run(sim: &Simulator) -> Reference {
    let mut values = sim.scratch();
    let mut state = sim.initial_state();
    let mut states = Vec::with_capacity(sim.cycles() + 1);
    let mut outputs = Vec::with_capacity(sim.cycles());
    for cycle in 0..sim.cycles() {
        states.push(state.clone());
        let mut out = vec![false; sim.width()];
        sim.step(&mut values, &mut state, cycle, &mut out);
        outputs.push(out);
    }
    states.push(state);
    Reference { states, outputs }
}

/// Whether flipping `slot` entering `cycle` ever disturbs an observed output.
///
/// The faulty run resumes from the golden state at `cycle` and ends at the
/// first output mismatch, or as soon as its state re-joins the golden state,
/// after which both runs are identical.
fn injection_fails(sim: &Simulator, golden: &Reference, slot: usize, cycle: usize) -> bool {
    let mut values = sim.scratch();
    let mut state = golden.states[cycle].clone();
    state[slot] = !state[slot];
    let mut out = vec![false; sim.width()];
    for t in cycle..sim.cycles() {
        sim.step(&mut values, &mut state, t, &mut out);
        if out != golden.outputs[t] {
            return true;
        }
        if state == golden.states[t + 1] {
            return false;
        }
    }
    false
}

/// Inject every flip-flop at every cycle and tally failures.
///
/// Injections run as a parallel map on the current rayon pool; the tally is
/// independent of completion order.
pub fn run_campaign(n: &Netlist, s: &Stimulus, fit: &FitRates) -> Result<CampaignResult, SimError> {
    let order: Vec<InjectionSpec> = n
        .flip_flops()
        .into_iter()
        .flat_map(|ff| (0..s.cycles()).map(move |cycle| InjectionSpec { ff, cycle }))
        .collect();
    run_campaign_in_order(n, s, fit, &order)
}

/// Same as [`run_campaign`] with an explicit enumeration order, which must
/// list every (flip-flop, cycle) pair exactly once.
pub fn run_campaign_in_order(
    n: &Netlist,
    s: &Stimulus,
    fit: &FitRates,
    order: &[InjectionSpec],
) -> Result<CampaignResult, SimError> {
    let sim = Simulator::new(n, s)?;
    let ffs = sim.flip_flops().to_vec();
    if ffs.is_empty() {
        return Err(SimError::NoFlipFlops);
    }
    fit.validate(n)?;
    let cycles = sim.cycles();
    if order.len() != ffs.len() * cycles {
        return Err(SimError::BadOrder(format!(
            "{} entries for {} pairs",
            order.len(),
            ffs.len() * cycles
        )));
    }
    let mut seen = HashSet::with_capacity(order.len());
    let mut slots = Vec::with_capacity(order.len());
    for inj in order {
        let slot = sim
            .ff_slot(inj.ff)
            .ok_or_else(|| SimError::BadOrder(format!("cell {} is not a flip-flop", inj.ff)))?;
        if inj.cycle >= cycles || !seen.insert(*inj) {
            return Err(SimError::BadOrder(format!(
                "pair ({}, {}) out of range or repeated",
                inj.ff, inj.cycle
            )));
        }
        slots.push((slot, inj.cycle));
    }

    let golden = reference_run(&sim);
    let failed: Vec<bool> = slots
        .par_iter()
        .with_min_len(64)
        .map(|&(slot, cycle)| injection_fails(&sim, &golden, slot, cycle))
        .collect();

    let mut failures = vec![0u64; ffs.len()];
    for (&(slot, _), &f) in slots.iter().zip(&failed) {
        failures[slot] += u64::from(f);
    }
    let injections = cycles as u64;
    let per_ff: Vec<FlipFlopResult> = ffs
        .iter()
        .zip(failures)
        .map(|(&ff, failure_count)| {
            let name = n.cell(ff).name.clone();
            let rate = fit.rate(&name);
            let derating = DeratingFactors::empirical(failure_count, injections);
            FlipFlopResult {
                ffr: rate * derating.product(),
                name,
                node: ff,
                failure_count,
                injection_count: injections,
                fit: rate,
                derating,
            }
        })
        .collect();
    let mut result = CampaignResult {
        cycles,
        per_ff,
        aggregate: 0.0,
    };
    result.aggregate = aggregate_ffr(&result);
    Ok(result)
}
