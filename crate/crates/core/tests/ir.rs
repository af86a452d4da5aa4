// SPDX-License-Identifier: Apache-2.0

use arianna_core::equiv::{check, EquivOptions};
use arianna_core::fixtures::{corpus, des3_like, CORPUS_SEED, CORPUS_SIZE};
use arianna_core::ir::{
    design_to_json, emit_verilog, flatten, isomorphic, parse_json_ir, parse_verilog, simulate, Design,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(v: u64, w: usize) -> impl Iterator<Item = bool> {
    (0..w).map(move |i| v >> i & 1 == 1)
}

fn word(b: &[bool]) -> u64 {
    b.iter().enumerate().fold(0, |a, (i, &x)| a | (x as u64) << i)
}

#[test]
fn adder_matches_integer_sum_on_all_pairs() {
    let d = parse_verilog(
        "module fa(input a, b, ci, output s, co); assign s = a ^ b ^ ci; assign co = (a & b) | (ci & (a ^ b)); endmodule
         module add4(input [3:0] a, input [3:0] b, output [4:0] y);
           wire [4:0] c;
           assign c[0] = 1'b0;
           fa f0(.a(a[0]), .b(b[0]), .ci(c[0]), .s(y[0]), .co(c[1]));
           fa f1(.a(a[1]), .b(b[1]), .ci(c[1]), .s(y[1]), .co(c[2]));
           fa f2(.a(a[2]), .b(b[2]), .ci(c[2]), .s(y[2]), .co(c[3]));
           fa f3(.a(a[3]), .b(b[3]), .ci(c[3]), .s(y[3]), .co(y[4]));
         endmodule",
    )
    .unwrap();
    let stim: Vec<Vec<bool>> = (0..256u64).map(|m| bits(m & 15, 4).chain(bits(m >> 4, 4)).collect()).collect();
    let out = simulate(&d, "add4", &stim).unwrap();
    for (m, o) in out.iter().enumerate() {
        assert_eq!(word(o), (m as u64 & 15) + (m as u64 >> 4), "pair {m}");
    }
}

#[test]
fn expressions_match_reference_on_random_vectors() {
    let d = parse_verilog(
        "module e(input [7:0] a, input [7:0] b, input [7:0] c, output [7:0] y, output lt, output [7:0] m);
           assign y = (a + b) ^ ~c;
           assign lt = a < b;
           assign m = c[0] ? a - b : (a & b) | c;
         endmodule",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vecs: Vec<(u64, u64, u64)> =
        (0..1000).map(|_| (rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256))).collect();
    let stim: Vec<Vec<bool>> = vecs.iter().map(|&(a, b, c)| bits(a, 8).chain(bits(b, 8)).chain(bits(c, 8)).collect()).collect();
    let out = simulate(&d, "e", &stim).unwrap();
    for (&(a, b, c), o) in vecs.iter().zip(&out) {
        assert_eq!(word(&o[0..8]), (a + b) & 255 ^ (!c & 255));
        assert_eq!(o[8], a < b);
        let m = if c & 1 == 1 { a.wrapping_sub(b) & 255 } else { (a & b) | c };
        assert_eq!(word(&o[9..17]), m);
    }
}

fn equivalent(a: &Design, b: &Design) -> bool {
    let fa = flatten(a, a.top()).unwrap();
    let fb = flatten(b, b.top()).unwrap();
    check(&fa, &fb, &EquivOptions::default()).unwrap().equivalent()
}

#[test]
fn emitted_corpus_reparses_isomorphic() {
    for (name, src) in corpus(CORPUS_SEED, CORPUS_SIZE) {
        let d = parse_verilog(&src).unwrap();
        assert_eq!(d.top(), name);
        let back = parse_verilog(&emit_verilog(&d)).unwrap();
        assert!(isomorphic(&d, &back), "{name}");
        assert!(equivalent(&d, &back), "{name}");
    }
}

#[test]
fn json_round_trip_keeps_hierarchy() {
    let d = parse_verilog(&des3_like(false)).unwrap();
    let j = parse_json_ir(&design_to_json(&d).unwrap()).unwrap();
    assert!(isomorphic(&d, &j));
    let tree = j.tree();
    assert_eq!(tree.len(), 9);
    assert_eq!(tree.leaves().count(), 8);
    assert!(equivalent(&d, &j));
}

#[test]
fn rejects_malformed_designs() {
    for src in [
        "module m(input a, output y); endmodule",
        "module m(input a, output y); assign y = a; assign y = ~a; endmodule",
        "module m(input a, output y); wire t; assign t = ~y; assign y = t & a; endmodule",
        "module m(input a, output y); n u(.a(a), .y(y)); endmodule",
        "module m(input a, output y) assign y = a; endmodule",
    ] {
        assert!(parse_verilog(src).is_err(), "{src}");
    }
}
