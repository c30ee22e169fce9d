// SPDX-License-Identifier: Apache-2.0

//! Random sequential circuits for scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netlist::GateKind;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("need at least one flip-flop")]
    NoFlipFlops,
    #[error("need at least as many gates as flip-flops ({gates} < {ffs})")]
    TooFewGates { ffs: usize, gates: usize },
}

const KINDS: [(GateKind, u32); 8] = [
    (GateKind::And, 4),
    (GateKind::Nand, 4),
    (GateKind::Or, 4),
    (GateKind::Nor, 4),
    (GateKind::Xor, 2),
    (GateKind::Xnor, 1),
    (GateKind::Not, 2),
    (GateKind::Buf, 1),
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Src {
    Pi(usize),
    Ff(usize),
    Gate(usize),
}

fn name(s: Src) -> String {
    match s {
        Src::Pi(i) => format!("pi{i}"),
        Src::Ff(i) => format!("ff{i}"),
        Src::Gate(i) => format!("g{i}"),
    }
}

fn pick_kind<R: Rng>(rng: &mut R) -> GateKind {
    let total: u32 = KINDS.iter().map(|k| k.1).sum();
    let mut r = rng.random_range(0..total);
    for (k, w) in KINDS {
        if r < w {
            return k;
        }
        r -= w;
    }
    unreachable!()
}

/// A random `.bench` netlist with `n_ffs` flip-flops and `n_gates` gates.
///
/// Every gate's first input comes from a primary input or an earlier gate,
/// so the combinational part is acyclic and every signal depends on some
/// primary input. Remaining inputs prefer flip-flop outputs that are still
/// unread. Each flip-flop samples a random gate. Gates nobody reads become
/// primary outputs, and any flip-flop whose value cannot reach an output
/// through gates and flip-flops gets an extra output on one of its readers.
pub fn generate_bench(n_ffs: usize, n_gates: usize, seed: u64) -> Result<String, GenError> {
    if n_ffs == 0 {
        return Err(GenError::NoFlipFlops);
    }
    if n_gates < n_ffs {
        return Err(GenError::TooFewGates {
            ffs: n_ffs,
            gates: n_gates,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pis = (n_ffs / 4 + 1).clamp(2, 64);

    let mut unread_ffs: Vec<usize> = (0..n_ffs).rev().collect();
    let mut gates: Vec<(GateKind, Vec<Src>)> = Vec::with_capacity(n_gates);
    for g in 0..n_gates {
        let kind = pick_kind(&mut rng);
        let arity = match kind {
            GateKind::Not | GateKind::Buf => 1,
            _ if rng.random_bool(0.2) => 3,
            _ => 2,
        };
        let first = rng.random_range(0..n_pis + g);
        let mut ins = vec![if first < n_pis {
            Src::Pi(first)
        } else {
            Src::Gate(first - n_pis)
        }];
        while ins.len() < arity {
            let s = if let Some(f) = unread_ffs.pop() {
                Src::Ff(f)
            } else {
                let r = rng.random_range(0..n_pis + n_ffs + g);
                if r < n_pis {
                    Src::Pi(r)
                } else if r < n_pis + n_ffs {
                    Src::Ff(r - n_pis)
                } else {
                    Src::Gate(r - n_pis - n_ffs)
                }
            };
            // Only random picks can repeat an input; stop at the first one.
            if ins.contains(&s) {
                break;
            }
            ins.push(s);
        }
        let kind = if ins.len() == 1 && !matches!(kind, GateKind::Not | GateKind::Buf) {
            GateKind::Buf
        } else {
            kind
        };
        gates.push((kind, ins));
    }
    let d_inputs: Vec<usize> = (0..n_ffs).map(|_| rng.random_range(0..n_gates)).collect();

    // Readers of every gate and flip-flop.
    let mut gate_readers = vec![Vec::new(); n_gates];
    let mut ff_readers = vec![Vec::new(); n_ffs];
    for (g, (_, ins)) in gates.iter().enumerate() {
        for s in ins {
            match *s {
                Src::Gate(h) => gate_readers[h].push(Src::Gate(g)),
                Src::Ff(f) => ff_readers[f].push(Src::Gate(g)),
                Src::Pi(_) => {}
            }
        }
    }
    for (f, &g) in d_inputs.iter().enumerate() {
        gate_readers[g].push(Src::Ff(f));
    }
    let mut outputs: Vec<Src> = (0..n_gates)
        .filter(|&g| gate_readers[g].is_empty())
        .map(Src::Gate)
        .collect();

    // Backward reachability from the outputs over gates and flip-flops.
    let observed = |outputs: &[Src]| {
        let mut seen_g = vec![false; n_gates];
        let mut seen_f = vec![false; n_ffs];
        let mut stack: Vec<Src> = outputs.to_vec();
        while let Some(s) = stack.pop() {
            match s {
                Src::Gate(g) if !seen_g[g] => {
                    seen_g[g] = true;
                    stack.extend(gates[g].1.iter().copied());
                }
                Src::Ff(f) if !seen_f[f] => {
                    seen_f[f] = true;
                    stack.push(Src::Gate(d_inputs[f]));
                }
                _ => {}
            }
        }
        seen_f
    };
    let mut seen = observed(&outputs);
    for f in 0..n_ffs {
        if !seen[f] {
            outputs.push(ff_readers[f].first().copied().unwrap_or(Src::Ff(f)));
            seen = observed(&outputs);
        }
    }

    let mut text = format!("# generated: {n_ffs} flip-flops, {n_gates} gates, seed {seed}\n");
    for i in 0..n_pis {
        text.push_str(&format!("INPUT(pi{i})\n"));
    }
    for &o in &outputs {
        text.push_str(&format!("OUTPUT({})\n", name(o)));
    }
    for (f, &g) in d_inputs.iter().enumerate() {
        text.push_str(&format!("ff{f} = DFF(g{g})\n"));
    }
    for (g, (kind, ins)) in gates.iter().enumerate() {
        let args: Vec<String> = ins.iter().map(|&s| name(s)).collect();
        text.push_str(&format!("g{g} = {}({})\n", kind.name(), args.join(", ")));
    }
    Ok(text)
}
