// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use arianna_core::clustering::Cluster;
use arianna_core::fabric::{characterize, FabricParams, FabricResult};
use arianna_core::fixtures::solution_count_fixture;
use arianna_core::ir::{parse_verilog, InstancePath};
use arianna_core::selection::{
    enumerate_solutions, rank_and_select, score_utils, FabricCandidate, FabricScoreContext, Solution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force(sets: &[Vec<InstancePath>], max: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    for mask in 1u32..1 << sets.len() {
        let picked: Vec<usize> = (0..sets.len()).filter(|i| mask >> i & 1 == 1).collect();
        if picked.len() > max {
            continue;
        }
        let mut seen = BTreeSet::new();
        if picked.iter().flat_map(|&i| &sets[i]).all(|p| seen.insert(p.clone())) {
            out.insert(picked);
        }
    }
    out
}

#[test]
fn enumeration_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..100 {
        let pool = rng.gen_range(3..=10);
        let count = rng.gen_range(1..=12);
        let sets: Vec<Vec<InstancePath>> = (0..count)
            .map(|_| {
                let mut s: Vec<InstancePath> = (0..pool)
                    .filter(|_| rng.gen_bool(0.3))
                    .map(|i| InstancePath::new(format!("top.u{i}")))
                    .collect();
                if s.is_empty() {
                    s.push(InstancePath::new(format!("top.u{}", rng.gen_range(0..pool))));
                }
                s
            })
            .collect();
        let max = rng.gen_range(1..=4);
        let got = enumerate_solutions(&sets, max);
        let as_set: BTreeSet<Vec<usize>> = got.iter().cloned().collect();
        assert_eq!(as_set.len(), got.len(), "round {round}: duplicates");
        assert_eq!(as_set, brute_force(&sets, max), "round {round}");
    }
}

#[test]
fn calibrated_fixture_count() {
    let sets = solution_count_fixture();
    assert_eq!(sets.len(), 218);
    assert_eq!(enumerate_solutions(&sets, 2).len(), 2219);
}

fn base_result() -> FabricResult {
    let d = parse_verilog("module w(input a, output y); assign y = ~a; endmodule").unwrap();
    characterize(&d, &FabricParams::new(2, 4)).unwrap()
}

fn candidate(members: &[&str], io: f64, clb: f64, area: f64) -> FabricCandidate {
    let mut r = base_result();
    r.io_util = io;
    r.clb_util = clb;
    r.area_estimate = area;
    let cluster = Cluster::new(members.iter().map(|m| InstancePath::new(*m)).collect(), 1);
    FabricCandidate { cluster, params: r.params, result: r }
}

fn select(cands: &[FabricCandidate], max: usize) -> Vec<usize> {
    let ctx = FabricScoreContext::from_results(cands.iter().map(|c| &c.result)).unwrap();
    let sols: Vec<Solution> = enumerate_solutions(cands, max).into_iter().map(|s| Solution::build(s, cands, &ctx)).collect();
    rank_and_select(&sols, cands).unwrap().fabrics.clone()
}

#[test]
fn lower_score_wins() {
    let cands = vec![candidate(&["t.a"], 1.0, 1.0, 100.0), candidate(&["t.a", "t.b"], 0.6, 1.0, 10.0)];
    assert_eq!(select(&cands, 1), vec![0]);
}

#[test]
fn equal_score_prefers_more_instances() {
    let cands = vec![candidate(&["t.a"], 1.0, 1.0, 10.0), candidate(&["t.b", "t.c"], 1.0, 1.0, 50.0)];
    assert_eq!(select(&cands, 1), vec![1]);
    // the pair of both has the same mean and redacts all three
    assert_eq!(select(&cands, 2), vec![0, 1]);
}

#[test]
fn equal_score_and_size_prefers_less_area() {
    let cands = vec![candidate(&["t.a"], 1.0, 1.0, 30.0), candidate(&["t.b"], 1.0, 1.0, 20.0)];
    assert_eq!(select(&cands, 1), vec![1]);
}

#[test]
fn area_scaling_keeps_choice() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let names = ["t.a", "t.b", "t.c", "t.d"];
        let cands: Vec<FabricCandidate> = (0..6)
            .map(|_| {
                let m: Vec<&str> = names.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
                let m = if m.is_empty() { vec!["t.a"] } else { m };
                let q = |rng: &mut ChaCha8Rng| rng.gen_range(1..=4) as f64 / 4.0;
                candidate(&m, q(&mut rng), q(&mut rng), rng.gen_range(1..100) as f64)
            })
            .collect();
        let scaled: Vec<FabricCandidate> = cands
            .iter()
            .cloned()
            .map(|mut c| {
                c.result.area_estimate *= 7.5;
                c
            })
            .collect();
        assert_eq!(select(&cands, 2), select(&scaled, 2));
    }
}

#[test]
fn score_is_antitone() {
    let ctx = FabricScoreContext::new(0.9, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (io, clb) = (rng.gen_range(0.0..0.9), rng.gen_range(0.0..0.8));
        let t = score_utils(io, clb, &ctx);
        assert!(score_utils((io + 0.05).min(0.9), clb, &ctx) <= t);
        assert!(score_utils(io, (clb + 0.05).min(0.8), &ctx) <= t);
    }
}
