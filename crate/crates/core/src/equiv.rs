// SPDX-License-Identifier: Apache-2.0
//! Simulation-based equivalence checks between two flat netlists.
//!
//! Ports are matched by name. Inputs present only in the second netlist are
//! held at 0, and only the first netlist's outputs are compared.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{FlatNetlist, IrError, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivOptions {
    /// Exhaustive for combinational netlists with at most this many input bits.
    pub exhaustive_limit: usize,
    /// Minimum number of random vectors (or random sequences when sequential).
    pub vectors: usize,
    /// Clock cycles per sequence for sequential netlists.
    pub cycles: usize,
    pub seed: u64,
}

impl Default for EquivOptions {
    fn default() -> Self {
        Self { exhaustive_limit: 12, vectors: 1000, cycles: 20, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub output: String,
    pub bit: usize,
    pub cycle: usize,
    /// Input assignment of the failing lane, first netlist's order.
    pub inputs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivReport {
    pub exhaustive: bool,
    pub vectors: usize,
    pub mismatch: Option<Mismatch>,
}

impl EquivReport {
    pub fn equivalent(&self) -> bool {
        self.mismatch.is_none()
    }
}

pub fn check(a: &FlatNetlist, b: &FlatNetlist, opts: &EquivOptions) -> Result<EquivReport, IrError> {
    let mut b_input_of = Vec::new();
    for (name, sigs) in &a.inputs {
        let other = b.inputs.iter().find(|(n, _)| n == name);
        match other {
            Some((_, s)) if s.len() == sigs.len() => b_input_of.push(Some(name.as_str())),
            Some(_) => return Err(IrError::WidthMismatch(format!("input `{name}`"))),
            None => b_input_of.push(None),
        }
    }
    // output bit positions of `a`'s outputs inside `b`'s output vector
    let b_offsets = offsets(&b.outputs);
    let mut out_map = Vec::new();
    for (name, sigs) in &a.outputs {
        let j = b
            .outputs
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| IrError::Schema(format!("output `{name}` missing from the second netlist")))?;
        if b.outputs[j].1.len() != sigs.len() {
            return Err(IrError::WidthMismatch(format!("output `{name}`")));
        }
        out_map.push(b_offsets[j]);
    }
    let b_in_offsets = offsets(&b.inputs);
    let a_in_offsets = offsets(&a.inputs);
    let to_b = |words: &[u64]| -> Vec<u64> {
        let mut v = vec![0u64; b.input_bits()];
        for (i, (name, sigs)) in a.inputs.iter().enumerate() {
            if b_input_of[i].is_some() {
                let j = b.inputs.iter().position(|(n, _)| n == name).unwrap();
                let (src, dst) = (a_in_offsets[i], b_in_offsets[j]);
                v[dst..dst + sigs.len()].copy_from_slice(&words[src..src + sigs.len()]);
            }
        }
        v
    };

    let mut sa = Simulator::new(a)?;
    let mut sb = Simulator::new(b)?;
    let bits = a.input_bits();
    let sequential = a.has_flops() || b.has_flops();
    let exhaustive = !sequential && bits <= opts.exhaustive_limit;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (batches, cycles, lanes_total) = if exhaustive {
        let total = 1usize << bits;
        (total.div_ceil(64), 1, total)
    } else if sequential {
        let b = opts.vectors.div_ceil(64).max(1);
        (b, opts.cycles.max(1), b * 64)
    } else {
        let b = opts.vectors.div_ceil(64).max(1);
        (b, 1, b * 64)
    };
    for batch in 0..batches {
        sa.reset();
        sb.reset();
        for cycle in 0..cycles {
            let words: Vec<u64> = if exhaustive {
                (0..bits)
                    .map(|i| {
                        (0..64u64).fold(0u64, |w, lane| {
                            let m = (batch as u64) * 64 + lane;
                            w | (((m >> i) & 1) << lane)
                        })
                    })
                    .collect()
            } else {
                (0..bits).map(|_| rng.gen::<u64>()).collect()
            };
            let oa = sa.step(&words)?;
            let ob = sb.step(&to_b(&words))?;
            let mut pos = 0;
            for (k, (name, sigs)) in a.outputs.iter().enumerate() {
                for bit in 0..sigs.len() {
                    let mut diff = oa[pos] ^ ob[out_map[k] + bit];
                    if exhaustive {
                        let live = lanes_total - batch * 64;
                        if live < 64 {
                            diff &= (1u64 << live) - 1;
                        }
                    }
                    if diff != 0 {
                        let lane = diff.trailing_zeros();
                        return Ok(EquivReport {
                            exhaustive,
                            vectors: lanes_total,
                            mismatch: Some(Mismatch {
                                output: name.clone(),
                                bit,
                                cycle,
                                inputs: words.iter().map(|w| (w >> lane) & 1 == 1).collect(),
                            }),
                        });
                    }
                    pos += 1;
                }
            }
        }
    }
    Ok(EquivReport { exhaustive, vectors: lanes_total, mismatch: None })
}

fn offsets(ports: &[(String, Vec<crate::ir::Sig>)]) -> Vec<usize> {
    let mut acc = 0;
    ports
        .iter()
        .map(|(_, s)| {
            let o = acc;
            acc += s.len();
            o
        })
        .collect()
}
