// SPDX-License-Identifier: Apache-2.0
//! Structural comparison of designs up to net renaming.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::{BitRef, Design, Direction, ModuleDef};

fn h<T: Hash>(v: T) -> u64 {
    let mut s = DefaultHasher::new();
    v.hash(&mut s);
    s.finish()
}

/// True when both designs have the same modules, ports and instances and
/// every module body is the same gate network once internal nets are
/// renamed. Uses colour refinement, so it may in principle accept
/// non-isomorphic but indistinguishable networks.
pub fn isomorphic(a: &Design, b: &Design) -> bool {
    if a.top() != b.top() || a.modules().count() != b.modules().count() {
        return false;
    }
    a.modules().all(|ma| match b.module(&ma.name) {
        Some(mb) => {
            ma.ports == mb.ports
                && ma.blackbox == mb.blackbox
                && ma.gates.len() == mb.gates.len()
                && instance_shape(ma) == instance_shape(mb)
                && colours(ma) == colours(mb)
        }
        None => false,
    })
}

fn instance_shape(m: &ModuleDef) -> Vec<(String, String)> {
    let mut v: Vec<_> = m.instances.iter().map(|i| (i.name.clone(), i.module.clone())).collect();
    v.sort();
    v
}

/// Sorted final colours of every bit that is driven or read.
fn colours(m: &ModuleDef) -> Vec<u64> {
    let mut index: HashMap<&BitRef, usize> = HashMap::new();
    let mut bits: Vec<BitRef> = Vec::new();
    for (n, &w) in &m.nets {
        for b in 0..w {
            bits.push(BitRef::new(n.as_str(), b));
        }
    }
    for (i, b) in bits.iter().enumerate() {
        index.insert(b, i);
    }
    let n = bits.len();
    // (label, input bits) of each bit's driver
    let mut driver: Vec<Option<(u64, Vec<usize>)>> = vec![None; n];
    // (label, position, driven bit) of each reader
    let mut readers: Vec<Vec<(u64, usize, Option<usize>)>> = vec![Vec::new(); n];
    let mut colour: Vec<u64> = vec![h("net"); n];
    for p in &m.ports {
        for b in 0..p.width {
            let i = index[&BitRef::new(p.name.as_str(), b)];
            colour[i] = h(("port", &p.name, b));
            if p.direction == Direction::Output {
                readers[i].push((h("out"), 0, None));
            }
        }
    }
    for g in &m.gates {
        let ins: Vec<usize> = g.inputs.iter().map(|x| index[x]).collect();
        let o = index[&g.output];
        let label = h(g.kind.name());
        for (pos, &i) in ins.iter().enumerate() {
            readers[i].push((label, pos, Some(o)));
        }
        driver[o] = Some((label, ins));
    }
    for inst in &m.instances {
        for (port, conn) in &inst.connections {
            for (k, b) in conn.iter().enumerate() {
                let i = index[b];
                let label = h((&inst.name, port, k));
                // instance pins are named, so either side anchors the bit
                readers[i].push((label, 0, None));
                colour[i] = h((colour[i], label));
            }
        }
    }
    let live: Vec<usize> = (0..n).filter(|&i| driver[i].is_some() || !readers[i].is_empty()).collect();
    let rounds = live.len().min(64) + 1;
    for _ in 0..rounds {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let d = driver[i].as_ref().map(|(l, ins)| (l, ins.iter().map(|&x| colour[x]).collect::<Vec<_>>()));
                let mut r: Vec<(u64, usize, u64)> =
                    readers[i].iter().map(|(l, p, o)| (*l, *p, o.map(|o| colour[o]).unwrap_or(0))).collect();
                r.sort_unstable();
                h((colour[i], d, r))
            })
            .collect();
        let stable = distinct(&next) == distinct(&colour);
        colour = next;
        if stable {
            break;
        }
    }
    let mut out: Vec<u64> = live.iter().map(|&i| colour[i]).collect();
    out.sort_unstable();
    out
}

fn distinct(v: &[u64]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_verilog;

    #[test]
    fn renaming_is_invisible_but_structure_is_not() {
        let a = parse_verilog("module m(input a, b, output y); wire t; assign t = a & b; assign y = ~t; endmodule").unwrap();
        let b = parse_verilog("module m(input a, b, output y); wire q; assign q = a & b; assign y = ~q; endmodule").unwrap();
        let c = parse_verilog("module m(input a, b, output y); wire q; assign q = a | b; assign y = ~q; endmodule").unwrap();
        let d = parse_verilog("module m(input a, b, output y); wire q; assign q = b & ~a; assign y = q; endmodule").unwrap();
        assert!(isomorphic(&a, &b));
        assert!(!isomorphic(&a, &c));
        assert!(!isomorphic(&a, &d));
    }
}
