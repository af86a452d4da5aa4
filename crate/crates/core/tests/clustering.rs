// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt::Write;

use arianna_core::clustering::{build_wrapper, identify_clusters, is_valid_cluster, ClusterError};
use arianna_core::dataflow::{filter_modules, FilterParams};
use arianna_core::equiv::{check, EquivOptions};
use arianna_core::ir::{flatten, parse_verilog, Design};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Top with a random mix of leaf inverters and two-leaf chains of random
/// widths, each on its own output.
fn random_hierarchy(rng: &mut ChaCha8Rng) -> (Design, Vec<String>) {
    let mut v = String::new();
    for w in 1..=6 {
        writeln!(v, "module inv{w}(input [{m}:0] a, output [{m}:0] y); assign y = ~a; endmodule", m = w - 1).unwrap();
        writeln!(
            v,
            "module chain{w}(input [{m}:0] a, output [{m}:0] y); wire [{m}:0] t; inv{w} p(.a(a), .y(t)); inv{w} q(.a(t), .y(y)); endmodule",
            m = w - 1
        )
        .unwrap();
    }
    let count = rng.gen_range(2..=6);
    let outs: Vec<String> = (0..count).map(|i| format!("o{i}")).collect();
    let decl: Vec<String> = outs.iter().map(|o| format!("output [5:0] {o}")).collect();
    writeln!(v, "module top(input [5:0] x, {});", decl.join(", ")).unwrap();
    for (i, o) in outs.iter().enumerate() {
        let w = rng.gen_range(1..=6);
        let kind = if rng.gen_bool(0.5) { "inv" } else { "chain" };
        writeln!(v, "  wire [{m}:0] y{i};", m = w - 1).unwrap();
        writeln!(v, "  {kind}{w} u{i}(.a(x[{m}:0]), .y(y{i}));", m = w - 1).unwrap();
        let pad = if w < 6 { format!("{{{}'d0, y{i}}}", 6 - w) } else { format!("y{i}") };
        writeln!(v, "  assign {o} = {pad};").unwrap();
    }
    v.push_str("endmodule\n");
    (parse_verilog(&v).unwrap(), outs)
}

#[test]
fn clusters_match_subset_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..40 {
        let (d, outs) = random_hierarchy(&mut rng);
        let max_io = rng.gen_range(2..=30);
        let cands = filter_modules(&d, &FilterParams::new(max_io, outs)).unwrap();
        assert!(cands.len() <= 14, "round {round}");
        let got: BTreeSet<String> = identify_clusters(&cands, max_io, 100_000).unwrap().into_iter().map(|c| c.id).collect();
        let mut want = BTreeSet::new();
        for mask in 1u32..1 << cands.len() {
            let members: Vec<_> = (0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i].instance_path.clone()).collect();
            if is_valid_cluster(&d, &members, max_io).unwrap() {
                let mut ids: Vec<&str> = members.iter().map(|m| m.as_str()).collect();
                ids.sort();
                want.insert(ids.join("+"));
            }
        }
        assert_eq!(got, want, "round {round}");
    }
}

#[test]
fn cap_aborts_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (d, outs) = random_hierarchy(&mut rng);
    let cands = filter_modules(&d, &FilterParams::new(1000, outs)).unwrap();
    assert!(matches!(identify_clusters(&cands, 1000, 1), Err(ClusterError::CapExceeded { cap: 1 })));
}

#[test]
fn wrapper_behaves_like_its_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (d, outs) = random_hierarchy(&mut rng);
    let cands = filter_modules(&d, &FilterParams::new(1000, outs)).unwrap();
    for c in identify_clusters(&cands, 1000, 100_000).unwrap().iter().take(20) {
        let w = build_wrapper(&d, c).unwrap();
        // each binding drives or reads the member's port under the flat name
        let wrapped = flatten(&w.design, w.name()).unwrap();
        for b in &w.port_map {
            let module = d.module_at(&b.member).unwrap();
            let port = module.port(&b.port).unwrap();
            assert_eq!(port.width, b.width);
            let side = if port.direction == arianna_core::ir::Direction::Input { &wrapped.inputs } else { &wrapped.outputs };
            assert!(side.iter().any(|(n, s)| n == &b.wrapper_port && s.len() as u32 == b.width));
        }
        // a singleton wrapper is its member with renamed ports
        if c.members.len() == 1 {
            let m = d.module_at(&c.members[0]).unwrap();
            let sub = d.with_top(&m.name).unwrap();
            let mut alone = flatten(&sub, sub.top()).unwrap();
            let prefix = format!("{}_", c.members[0].flat_name());
            for (n, _) in alone.inputs.iter_mut().chain(alone.outputs.iter_mut()) {
                *n = format!("{prefix}{n}");
            }
            assert!(check(&alone, &wrapped, &EquivOptions::default()).unwrap().equivalent());
        }
    }
}
