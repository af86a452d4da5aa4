// SPDX-License-Identifier: Apache-2.0
//! Cycle-based, 64-lane bit-parallel simulation.
//!
//! Each `u64` carries 64 independent simulation lanes. Flip-flops power up at
//! 0 and all share one implicit clock: a call to [`Simulator::step`] computes
//! the outputs for the current inputs and state, then clocks every
//! flip-flop.

use super::{flatten, CellOp, Design, FlatNetlist, IrError, Result, Sig};

pub struct Simulator<'a> {
    net: &'a FlatNetlist,
    order: Vec<usize>,
    flops: Vec<usize>,
    values: Vec<u64>,
    state: Vec<u64>,
    scratch: Vec<u64>,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a FlatNetlist) -> Result<Self> {
        let order = net.comb_order().map_err(|s| IrError::CombinationalCycle {
            module: net.instances.first().map(|i| i.module.clone()).unwrap_or_default(),
            bit: net.names[s.idx()].clone(),
        })?;
        let flops: Vec<usize> = (0..net.cells.len()).filter(|&i| net.cells[i].op.is_sequential()).collect();
        Ok(Self {
            net,
            order,
            state: vec![0; flops.len()],
            flops,
            values: vec![0; net.num_signals()],
            scratch: Vec::with_capacity(8),
        })
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0);
    }

    /// `inputs` holds one lane word per input bit, ports in declaration order
    /// and bits LSB first. Returns one lane word per output bit.
    pub fn step(&mut self, inputs: &[u64]) -> Result<Vec<u64>> {
        let expected = self.net.input_bits();
        if inputs.len() != expected {
            return Err(IrError::WidthMismatch(format!(
                "stimulus has {} bits, module expects {expected}",
                inputs.len()
            )));
        }
        for (s, v) in self.net.input_sigs().zip(inputs) {
            self.values[s.idx()] = *v;
        }
        for s in &self.net.opaque {
            self.values[s.idx()] = 0;
        }
        for (i, &f) in self.flops.iter().enumerate() {
            self.values[self.net.cells[f].output.idx()] = self.state[i];
        }
        for &c in &self.order {
            let cell = &self.net.cells[c];
            self.scratch.clear();
            self.scratch.extend(cell.inputs.iter().map(|s| self.values[s.idx()]));
            let v = match &cell.op {
                CellOp::Gate(kind) => kind.eval(&self.scratch),
                CellOp::Lut(table) => table.eval_lanes(&self.scratch),
            };
            self.values[cell.output.idx()] = v;
        }
        let outs = self.net.output_sigs().map(|s| self.values[s.idx()]).collect();
        for (i, &f) in self.flops.iter().enumerate() {
            self.state[i] = self.values[self.net.cells[f].inputs[0].idx()];
        }
        Ok(outs)
    }

    pub fn value(&self, sig: Sig) -> u64 {
        self.values[sig.idx()]
    }
}

/// Simulates `module` of `design` on a sequence of input vectors (one per
/// clock cycle, input ports in declaration order, LSB first).
pub fn simulate(design: &Design, module: &str, stimulus: &[Vec<bool>]) -> Result<Vec<Vec<bool>>> {
    let net = flatten(design, module)?;
    simulate_flat(&net, stimulus)
}

pub(crate) fn simulate_flat(net: &FlatNetlist, stimulus: &[Vec<bool>]) -> Result<Vec<Vec<bool>>> {
    let mut sim = Simulator::new(net)?;
    stimulus
        .iter()
        .map(|vec| {
            let words: Vec<u64> = vec.iter().map(|&b| if b { !0 } else { 0 }).collect();
            Ok(sim.step(&words)?.into_iter().map(|w| w & 1 == 1).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_json_ir, parse_verilog};

    #[test]
    fn not_gate_truth_table() {
        let d = parse_verilog("module inv(input a, output y); assign y = ~a; endmodule").unwrap();
        let out = simulate(&d, "inv", &[vec![false], vec![true]]).unwrap();
        assert_eq!(out, vec![vec![true], vec![false]]);
    }

    #[test]
    fn mux_select_polarity() {
        // inputs in port order: s, a, b
        let d = parse_verilog("module m(input s, input a, input b, output y); assign y = s ? a : b; endmodule")
            .unwrap();
        let out = simulate(&d, "m", &[vec![true, true, false], vec![false, true, false]]).unwrap();
        assert_eq!(out, vec![vec![true], vec![false]]);
    }

    #[test]
    fn full_adder_matches_arithmetic() {
        let src = "module fa(input a, input b, input c, output s, output co);
            wire x = a ^ b;
            assign s = x ^ c;
            assign co = (a & b) | (x & c);
        endmodule";
        let d = parse_verilog(src).unwrap();
        let stim: Vec<Vec<bool>> = (0..8).map(|m| (0..3).map(|j| m >> j & 1 == 1).collect()).collect();
        let out = simulate(&d, "fa", &stim).unwrap();
        for (m, o) in out.iter().enumerate() {
            let sum = (m & 1) + (m >> 1 & 1) + (m >> 2 & 1);
            assert_eq!(o[0], sum & 1 == 1);
            assert_eq!(o[1], sum >= 2);
        }
    }

    #[test]
    fn flops_start_at_zero_and_delay_one_cycle() {
        let src = r#"{"top":"r","modules":{"r":{"ports":[{"name":"clk","dir":"input","width":1},
            {"name":"d","dir":"input","width":1},{"name":"q","dir":"output","width":1}],
            "gates":[{"kind":"DFF","inputs":["d"],"output":"q"}],"instances":[]}}}"#;
        let d = parse_json_ir(src).unwrap();
        let out = simulate(&d, "r", &[vec![false, true], vec![false, false], vec![false, true]]).unwrap();
        assert_eq!(out, vec![vec![false], vec![true], vec![false]]);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let d = parse_verilog("module inv(input a, output y); assign y = ~a; endmodule").unwrap();
        assert!(matches!(simulate(&d, "inv", &[vec![true, false]]), Err(IrError::WidthMismatch(_))));
    }
}
