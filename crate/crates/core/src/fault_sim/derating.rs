// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, VecDeque};

use super::SimError;
use crate::netlist::{CellId, Netlist};

/// Upper bound on free cone inputs for exhaustive enumeration.
pub const MAX_CONE_INPUTS: usize = 20;

/// Exact single-cycle logical derating of flip-flop `ff`.
///
/// Takes the primary outputs reachable from `ff` through combinational logic
/// only, collects every other source (primary input or DFF output) in their
/// fan-in cone, and enumerates all assignments of those sources. Returns the
/// fraction of assignments under which inverting `ff`'s output changes at
/// least one of those outputs.
pub fn logical_derating_bruteforce(n: &Netlist, ff: CellId) -> Result<f64, SimError> {
    if ff >= n.len() || !n.cell(ff).kind.is_sequential() {
        return Err(SimError::NotAFlipFlop(ff));
    }
    let mut fanout = vec![Vec::new(); n.len()];
    for (id, cell) in n.cells().iter().enumerate() {
        for &d in &cell.fanin {
            fanout[d].push(id);
        }
    }

    let mut reached = vec![false; n.len()];
    let mut queue = VecDeque::from([ff]);
    reached[ff] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &fanout[v] {
            if !reached[w] && n.cell(w).kind.is_combinational() {
                reached[w] = true;
                queue.push_back(w);
            }
        }
    }
    let outputs: Vec<CellId> = n
        .primary_outputs()
        .iter()
        .copied()
        .filter(|&o| reached[o])
        .collect();
    if outputs.is_empty() {
        return Ok(0.0);
    }

    let mut in_cone = vec![false; n.len()];
    let mut sources = BTreeSet::new();
    let mut queue: VecDeque<CellId> = outputs.iter().copied().collect();
    for &o in &outputs {
        in_cone[o] = true;
    }
    while let Some(v) = queue.pop_front() {
        if !n.cell(v).kind.is_combinational() {
            if v != ff {
                sources.insert(v);
            }
            continue;
        }
        for &d in &n.cell(v).fanin {
            if !in_cone[d] {
                in_cone[d] = true;
                queue.push_back(d);
            }
        }
    }
    let sources: Vec<CellId> = sources.into_iter().collect();
    if sources.len() > MAX_CONE_INPUTS {
        return Err(SimError::ConeTooLarge {
            inputs: sources.len(),
            limit: MAX_CONE_INPUTS,
        });
    }

    let eval: Vec<CellId> = n
        .topo_order()
        .iter()
        .copied()
        .filter(|&c| in_cone[c] && n.cell(c).kind.is_combinational())
        .collect();
    let mut values = vec![false; n.len()];
    let evaluate = |assignment: u32, ff_value: bool, values: &mut Vec<bool>| -> Vec<bool> {
        for (bit, &s) in sources.iter().enumerate() {
            values[s] = assignment >> bit & 1 == 1;
        }
        values[ff] = ff_value;
        for &c in &eval {
            let cell = n.cell(c);
            let v = cell.kind.eval(cell.fanin.iter().map(|&p| values[p]));
            values[c] = v;
        }
        outputs.iter().map(|&o| values[o]).collect()
    };

    let total = 1u32 << sources.len();
    let mut propagated = 0u32;
    for assignment in 0..total {
        let low = evaluate(assignment, false, &mut values);
        let high = evaluate(assignment, true, &mut values);
        if low != high {
            propagated += 1;
        }
    }
    Ok(f64::from(propagated) / f64::from(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn ldr(text: &str) -> f64 {
        let n = parse_bench(text).unwrap();
        logical_derating_bruteforce(&n, n.find("q").unwrap()).unwrap()
    }

    #[test]
    fn xor_always_propagates() {
        assert_eq!(ldr("INPUT(a)\nq = DFF(a)\nOUTPUT(z)\nz = XOR(q, a)"), 1.0);
    }

    #[test]
    fn and_masks_half_the_time() {
        assert_eq!(ldr("INPUT(a)\nq = DFF(a)\nOUTPUT(z)\nz = AND(q, a)"), 0.5);
    }

    #[test]
    fn dead_cone_is_zero() {
        assert_eq!(ldr("INPUT(a)\nq = DFF(a)\nOUTPUT(z)\nz = NOT(a)"), 0.0);
    }

    #[test]
    fn sequential_path_does_not_count() {
        // q only reaches the output through r, a state boundary.
        assert_eq!(ldr("INPUT(a)\nq = DFF(a)\nr = DFF(q)\nOUTPUT(r)"), 0.0);
    }

    #[test]
    fn reconvergent_cone() {
        // z = (q & a) | (q & b): propagates unless a = b = 0 -> 3/4.
        assert_eq!(
            ldr("INPUT(a)\nINPUT(b)\nq = DFF(a)\nx = AND(q, a)\ny = AND(q, b)\nOUTPUT(z)\nz = OR(x, y)"),
            0.75
        );
    }

    #[test]
    fn other_dff_is_a_free_input() {
        assert_eq!(
            ldr("INPUT(a)\nq = DFF(a)\np = DFF(a)\nOUTPUT(z)\nz = NOR(q, p)"),
            0.5
        );
    }

    #[test]
    fn too_large_cone_is_rejected() {
        let mut text = String::from("q = DFF(z)\nOUTPUT(z)\n");
        let inputs: Vec<String> = (0..21).map(|i| format!("i{i}")).collect();
        for i in &inputs {
            text.push_str(&format!("INPUT({i})\n"));
        }
        text.push_str(&format!("z = AND(q, {})\n", inputs.join(", ")));
        let n = parse_bench(&text).unwrap();
        assert!(matches!(
            logical_derating_bruteforce(&n, 0),
            Err(SimError::ConeTooLarge { inputs: 21, .. })
        ));
    }

    #[test]
    fn non_flip_flop_is_rejected() {
        let n = parse_bench("INPUT(a)\nOUTPUT(a)").unwrap();
        assert!(matches!(
            logical_derating_bruteforce(&n, 0),
            Err(SimError::NotAFlipFlop(0))
        ));
    }
}
