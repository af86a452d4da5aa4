// SPDX-License-Identifier: Apache-2.0
//! Generated benchmark designs and structures.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::InstancePath;

pub const DES3_SEED: u64 = 0x5b0c;

/// A DES-round-like design: eight registered 6-to-4 substitution boxes
/// with distinct pseudo-random tables, each 11 pins wide (clk, 6 in, 4 out).
/// With `keyed`, a 301-pin key-select block feeds an extra output `kout`.
pub fn des3_like(keyed: bool) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(DES3_SEED);
    let mut v = String::new();
    v.push_str("// SPDX-License-Identifier: Apache-2.0\n// Generated DES-round-like benchmark.\n\n");
    for s in 1..=8 {
        // each row of a DES box is a permutation of 0..15
        let mut table = Vec::with_capacity(64);
        for _ in 0..4 {
            let mut row: Vec<u32> = (0..16).collect();
            row.shuffle(&mut rng);
            table.extend(row);
        }
        writeln!(v, "module sbox{s}(input clk, input [5:0] a, output reg [3:0] q);").unwrap();
        v.push_str("  always @(posedge clk)\n    case (a)\n");
        for (i, t) in table.iter().enumerate() {
            writeln!(v, "      6'd{i}: q <= 4'd{t};").unwrap();
        }
        v.push_str("    endcase\nendmodule\n\n");
    }
    if keyed {
        v.push_str(
            "module key_sel(input [149:0] k, input [149:0] m, output y);\n  assign y = ^(k & m);\nendmodule\n\n",
        );
        v.push_str("module des3_like(input clk, input [47:0] x, input [149:0] key, output [31:0] out, output kout);\n");
    } else {
        v.push_str("module des3_like(input clk, input [47:0] x, output [31:0] out);\n");
    }
    for s in 1..=8 {
        let (lo, o) = (6 * (s - 1), 4 * (s - 1));
        writeln!(
            v,
            "  sbox{s} s{s}(.clk(clk), .a(x[{}:{lo}]), .q(out[{}:{o}]));",
            lo + 5,
            o + 3
        )
        .unwrap();
    }
    if keyed {
        v.push_str("  key_sel ks(.k(key), .m({x, x, x, x[47:6]}), .y(kout));\n");
    }
    v.push_str("endmodule\n");
    v
}

/// Member sets of 218 fabrics with exactly 2001 instance-disjoint pairs:
/// 63 pairwise-disjoint singletons, one 16-member set meeting 15 of them,
/// and 154 sets that meet everything.
pub fn solution_count_fixture() -> Vec<Vec<InstancePath>> {
    let b = |i: usize| InstancePath::new(format!("top.b{i}"));
    let mut sets: Vec<Vec<InstancePath>> = (0..63).map(|i| vec![b(i)]).collect();
    let mut partial: Vec<InstancePath> = (0..15).map(b).collect();
    partial.push(InstancePath::new("top.hub"));
    sets.push(partial);
    for j in 0..154 {
        let mut all: Vec<InstancePath> = (0..63).map(b).collect();
        all.push(InstancePath::new("top.hub"));
        all.push(InstancePath::new(format!("top.x{j}")));
        sets.push(all);
    }
    sets
}

/// Default size of the random corpus.
pub const CORPUS_SIZE: usize = 30;
pub const CORPUS_SEED: u64 = 2024;

/// A seeded corpus of small hierarchical designs: (top name, Verilog).
pub fn corpus(seed: u64, count: usize) -> Vec<(String, String)> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(i as u64));
            let name = format!("rand{i:02}");
            let src = random_design(&mut rng, &name);
            (name, src)
        })
        .collect()
}

struct LeafType {
    name: String,
    width: u32,
    sequential: bool,
    inputs: usize,
}

fn expr(rng: &mut ChaCha8Rng, depth: u32, ins: &[String], w: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.15) {
            format!("{w}'d{}", rng.gen_range(0..1u32 << w))
        } else {
            ins.choose(rng).unwrap().clone()
        };
    }
    let sub = |rng: &mut ChaCha8Rng| expr(rng, depth - 1, ins, w);
    match rng.gen_range(0..9) {
        0 => format!("({} & {})", sub(rng), sub(rng)),
        1 => format!("({} | {})", sub(rng), sub(rng)),
        2 => format!("({} ^ {})", sub(rng), sub(rng)),
        3 => format!("(~{})", sub(rng)),
        4 => {
            let s = ins.choose(rng).unwrap();
            format!("({s}[{}] ? {} : {})", rng.gen_range(0..w), sub(rng), sub(rng))
        }
        5 => format!("({} + {})", sub(rng), sub(rng)),
        6 => format!("({} - {})", sub(rng), sub(rng)),
        7 => {
            let (a, b) = (ins.choose(rng).unwrap(), ins.choose(rng).unwrap());
            format!("(({a} < {b}) ? {} : {})", sub(rng), sub(rng))
        }
        _ => format!("({} ~^ {})", sub(rng), sub(rng)),
    }
}

fn random_design(rng: &mut ChaCha8Rng, top: &str) -> String {
    let mut v = String::from("// SPDX-License-Identifier: Apache-2.0\n// Generated corpus design.\n\n");
    let ntypes = rng.gen_range(2..=4);
    let mut types = Vec::new();
    for t in 0..ntypes {
        let lt = LeafType {
            name: format!("{top}_m{t}"),
            width: rng.gen_range(1..=4),
            sequential: rng.gen_bool(0.35),
            inputs: rng.gen_range(2..=3),
        };
        let w = lt.width;
        let ins: Vec<String> = (0..lt.inputs).map(|i| format!("i{i}")).collect();
        let decl_ins = ins.iter().map(|n| format!("input [{}:0] {n}", w - 1)).collect::<Vec<_>>().join(", ");
        let y = expr(rng, 3, &ins, w);
        let z = format!("(^{}) ^ ({} == {})", expr(rng, 2, &ins, w), ins[0], ins[1]);
        if lt.sequential {
            writeln!(v, "module {}(input clk, {decl_ins}, output reg [{}:0] y, output z);", lt.name, w - 1).unwrap();
            writeln!(v, "  reg [{}:0] s;", w - 1).unwrap();
            writeln!(v, "  always @(posedge clk) begin").unwrap();
            writeln!(v, "    s <= {y};").unwrap();
            writeln!(v, "    if ({}[0]) y <= s ^ {}; else y <= y;", ins[1], ins[0]).unwrap();
            writeln!(v, "  end").unwrap();
        } else {
            writeln!(v, "module {}({decl_ins}, output [{}:0] y, output z);", lt.name, w - 1).unwrap();
            writeln!(v, "  assign y = {y};").unwrap();
        }
        writeln!(v, "  assign z = {z};").unwrap();
        v.push_str("endmodule\n\n");
        types.push(lt);
    }
    // an optional two-leaf container module
    let mid = if rng.gen_bool(0.5) {
        let a = rng.gen_range(0..types.len());
        let b = rng.gen_range(0..types.len());
        let (ta, tb) = (&types[a], &types[b]);
        let w = ta.width.max(tb.width);
        let name = format!("{top}_mid");
        let seq = ta.sequential || tb.sequential;
        let clk = if seq { "input clk, " } else { "" };
        writeln!(v, "module {name}({clk}input [{}:0] p, input [{}:0] q, output [{}:0] r, output t);", w - 1, w - 1, w - 1).unwrap();
        writeln!(v, "  wire [{}:0] ya;\n  wire [{}:0] yb;\n  wire za, zb;", ta.width - 1, tb.width - 1).unwrap();
        writeln!(v, "  wire [{}:0] pq = p ^ q;", w - 1).unwrap();
        for (inst, t, src) in [("ua", ta, "p"), ("ub", tb, "q")] {
            let mut c = String::new();
            if t.sequential {
                c.push_str(".clk(clk), ");
            }
            for i in 0..t.inputs {
                let bits = if i == 0 { src } else { "pq" };
                write!(c, ".i{i}({bits}[{}:0]), ", t.width - 1).unwrap();
            }
            let y = if inst == "ua" { "ya" } else { "yb" };
            let z = if inst == "ua" { "za" } else { "zb" };
            writeln!(v, "  {} {inst}({c}.y({y}), .z({z}));", t.name).unwrap();
        }
        writeln!(v, "  assign r = ya ^ yb;\n  assign t = za | zb;").unwrap();
        v.push_str("endmodule\n\n");
        Some((name, w, seq))
    } else {
        None
    };

    let ninst = rng.gen_range(3..=6);
    let in_w = 8;
    let any_seq = types.iter().any(|t| t.sequential) || mid.as_ref().is_some_and(|m| m.2);
    let mut body = String::new();
    let mut outs = Vec::new();
    // signals available to later instances
    let mut pool: Vec<(String, u32)> = vec![("x".into(), in_w), ("w".into(), in_w)];
    for j in 0..ninst {
        let pick = rng.gen_range(0..types.len() + usize::from(mid.is_some()));
        let pick_src = |rng: &mut ChaCha8Rng, width: u32| -> String {
            let (s, sw) = pool.choose(rng).unwrap().clone();
            if sw >= width {
                let lo = rng.gen_range(0..=sw - width);
                format!("{s}[{}:{lo}]", lo + width - 1)
            } else {
                format!("{{{}'d0, {s}}}", width - sw)
            }
        };
        let (module, width, seq, ports): (String, u32, bool, Vec<&str>) = if pick < types.len() {
            let t = &types[pick];
            let ports = ["i0", "i1", "i2"][..t.inputs].to_vec();
            (t.name.clone(), t.width, t.sequential, ports)
        } else {
            let (name, w, seq) = mid.as_ref().unwrap();
            (name.clone(), *w, *seq, vec!["p", "q"])
        };
        let mut c = String::new();
        if seq {
            c.push_str(".clk(clk), ");
        }
        for p in ports {
            write!(c, ".{p}({}), ", pick_src(rng, width)).unwrap();
        }
        let (yo, zo) = if module.ends_with("_mid") { ("r", "t") } else { ("y", "z") };
        writeln!(body, "  wire [{}:0] y{j};\n  wire z{j};", width - 1).unwrap();
        writeln!(body, "  {module} u{j}({c}.{yo}(y{j}), .{zo}(z{j}));").unwrap();
        outs.push((format!("o{j}"), width, format!("y{j}")));
        outs.push((format!("f{j}"), 1, format!("z{j}")));
        pool.push((format!("y{j}"), width));
    }
    let clk = if any_seq { "input clk, " } else { "" };
    let out_decl = outs.iter().map(|(n, w, _)| format!("output [{}:0] {n}", w - 1)).collect::<Vec<_>>().join(", ");
    writeln!(v, "module {top}({clk}input [{}:0] x, input [{}:0] w, {out_decl});", in_w - 1, in_w - 1).unwrap();
    v.push_str(&body);
    for (n, _, s) in &outs {
        writeln!(v, "  assign {n} = {s};").unwrap();
    }
    v.push_str("endmodule\n");
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_verilog;

    #[test]
    fn des3_shapes() {
        let d = parse_verilog(&des3_like(false)).unwrap();
        assert_eq!(d.tree().len(), 9);
        assert_eq!(d.tree().leaves().count(), 8);
        assert!(d.modules().filter(|m| m.name.starts_with("sbox")).all(|m| m.io_pins() == 11));
        let k = parse_verilog(&des3_like(true)).unwrap();
        assert_eq!(k.module("key_sel").unwrap().io_pins(), 301);
    }

    #[test]
    fn corpus_parses_deterministically() {
        let a = corpus(CORPUS_SEED, CORPUS_SIZE);
        assert_eq!(a, corpus(CORPUS_SEED, CORPUS_SIZE));
        for (name, src) in &a {
            let d = parse_verilog(src).unwrap_or_else(|e| panic!("{name}: {e}\n{src}"));
            assert_eq!(d.top(), name);
        }
    }

    #[test]
    fn solution_fixture_shape() {
        assert_eq!(solution_count_fixture().len(), 218);
    }
}
