// SPDX-License-Identifier: Apache-2.0
//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use arianna_core::clustering::{identify_clusters, is_valid_cluster};
use arianna_core::config::FlowConfig;
use arianna_core::dataflow::{filter_modules, FilterParams};
use arianna_core::equiv::{check, EquivOptions};
use arianna_core::fabric::{form_bles, map_to_luts, pack_clbs, size_grid, FabricParams, DEFAULT_CUT_LIMIT};
use arianna_core::fixtures::{corpus, des3_like, CORPUS_SEED, CORPUS_SIZE};
use arianna_core::flow::{run_compare_on, run_flow_on};
use arianna_core::ir::{flatten, parse_verilog, CellOp, Design, InstancePath, Sig};
use arianna_core::selection::{enumerate_solutions, score_utils, FabricScoreContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLUSTER_TIME_LIMIT: Duration = Duration::from_secs(5);
const PARITY_TIME_LIMIT: Duration = Duration::from_secs(120);
const SCORE_TOLERANCE: f64 = 1e-12;
const MIN_VECTORS: usize = 1000;
const MIN_CYCLES: usize = 20;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn des3() -> Design {
    parse_verilog(&des3_like(false)).unwrap()
}

fn corpus_designs() -> Vec<(String, Design)> {
    corpus(CORPUS_SEED, CORPUS_SIZE).into_iter().map(|(n, s)| (n, parse_verilog(&s).unwrap())).collect()
}

fn all_outputs(d: &Design) -> Vec<String> {
    d.top_module().outputs().map(|p| p.name.clone()).collect()
}

fn cluster_count() -> Outcome {
    let d = des3();
    let mut parts = Vec::new();
    for (bound, want) in [(96, 255), (64, 218)] {
        let start = Instant::now();
        let cands = filter_modules(&d, &FilterParams::new(bound, vec!["out".into()])).map_err(|e| e.to_string())?;
        let got = identify_clusters(&cands, bound, 100_000).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure!(got.len() == want, "bound {bound}: {} clusters, expected {want}", got.len());
        ensure!(took < CLUSTER_TIME_LIMIT, "bound {bound}: {took:?} over {CLUSTER_TIME_LIMIT:?}");
        let got: BTreeSet<String> = got.into_iter().map(|c| c.id).collect();
        let mut brute = BTreeSet::new();
        for mask in 1u32..1 << cands.len() {
            let members: Vec<InstancePath> =
                (0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i].instance_path.clone()).collect();
            if is_valid_cluster(&d, &members, bound).unwrap() {
                brute.insert(members.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+"));
            }
        }
        ensure!(got == brute, "bound {bound}: clusters differ from subset brute force");
        parts.push(format!("{want} at max_io={bound} in {:.3}s", took.as_secs_f64()));
    }
    Ok(format!("{}; brute force agrees", parts.join(", ")))
}

fn heuristic_parity() -> Outcome {
    let start = Instant::now();
    let (mut clusters, mut nonminimal, mut ex_calls) = (0usize, 0usize, 0u64);
    let mut heur_calls = [0u64; 2];
    for (name, d) in corpus_designs() {
        let cfg = FlowConfig::cfg1(all_outputs(&d));
        let dse = cfg.dse();
        let (dn, dk) = (dse.n_range.1 - dse.n_range.0, dse.k_range.1 - dse.k_range.0);
        let cmp = run_compare_on(&d, &cfg).map_err(|e| format!("{name}: {e}"))?;
        for r in &cmp.rows {
            clusters += 1;
            let probe = r
                .exhaustive
                .evaluations
                .iter()
                .find(|e| (e.n, e.k) == (dse.n_range.1, dse.k_range.1))
                .map(|e| e.result.grid_side)
                .ok_or("exhaustive sweep lacks the top corner")?;
            for (h, (label, o)) in [("NK", &r.nk), ("KN", &r.kn)].into_iter().enumerate() {
                if let Some(c) = &o.chosen {
                    ensure!(
                        c.result.grid_side == probe,
                        "{name} {}: {label} chose W={} but the probe gives {probe}",
                        r.cluster.id,
                        c.result.grid_side
                    );
                }
                ensure!(
                    o.oracle_calls <= 1 + dn + dk + 2,
                    "{name} {}: {label} used {} calls",
                    r.cluster.id,
                    o.oracle_calls
                );
                if dn > 0 && dk > 0 && r.exhaustive.chosen.is_some() {
                    ensure!(o.oracle_calls < r.exhaustive.oracle_calls, "{name} {}: {label} not cheaper", r.cluster.id);
                }
                heur_calls[h] += o.oracle_calls as u64;
            }
            ex_calls += r.exhaustive.oracle_calls as u64;
            if let Some(c) = &r.exhaustive.chosen {
                ensure!(r.fixed.area_estimate >= c.result.area_estimate || r.fixed.grid_side > dse.max_grid_side,
                    "{name} {}: fixed (4, 4) beats exhaustive", r.cluster.id);
                if c.result.grid_side > probe {
                    nonminimal += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    ensure!(nonminimal >= 1, "no cluster has an exhaustive optimum above the probe side");
    ensure!(took < PARITY_TIME_LIMIT, "took {took:?}, over {PARITY_TIME_LIMIT:?}");
    Ok(format!(
        "{clusters} clusters over {CORPUS_SIZE} designs; NK/KN W equals probe W; oracle calls NK {} / KN {} / exhaustive {ex_calls}; {nonminimal}/{clusters} exhaustive optima above the probe side; {:.1}s",
        heur_calls[0],
        heur_calls[1],
        took.as_secs_f64()
    ))
}

fn mapping_correctness() -> Outcome {
    let (mut modules, mut exhaustive, mut random, mut packs) = (0usize, 0usize, 0usize, 0usize);
    let opts = EquivOptions { vectors: MIN_VECTORS, cycles: MIN_CYCLES, ..EquivOptions::default() };
    for (name, d) in corpus_designs() {
        for m in d.modules() {
            modules += 1;
            let src = flatten(&d, &m.name).map_err(|e| e.to_string())?;
            for k in 2..=6u32 {
                let map = map_to_luts(&src, k, DEFAULT_CUT_LIMIT).map_err(|e| format!("{name}/{}: {e}", m.name))?;
                for c in &map.net.cells {
                    if let CellOp::Lut(_) = c.op {
                        ensure!(c.inputs.len() <= k as usize, "{}: LUT wider than k={k}", m.name);
                    } else if !c.op.is_sequential() {
                        ensure!(matches!(c.op, CellOp::Gate(arianna_core::ir::GateKind::Buf)), "{}: stray gate", m.name);
                    }
                }
                let r = check(&src, &map.net, &opts).map_err(|e| e.to_string())?;
                ensure!(r.equivalent(), "{name}/{} k={k}: {:?}", m.name, r.mismatch);
                if r.exhaustive {
                    exhaustive += 1;
                } else {
                    ensure!(r.vectors >= MIN_VECTORS, "only {} vectors", r.vectors);
                    random += 1;
                }
                let bles = form_bles(&map.net);
                for n in 1..=10u32 {
                    let p = FabricParams::new(n, k);
                    let clbs = pack_clbs(&bles, &p).map_err(|e| e.to_string())?;
                    let mut seen = vec![0u32; bles.len()];
                    for clb in &clbs {
                        ensure!(clb.len() <= n as usize, "CLB over n={n}");
                        let outs: BTreeSet<Sig> = clb.iter().flat_map(|&b| bles[b].outputs.iter().copied()).collect();
                        let ins: BTreeSet<Sig> =
                            clb.iter().flat_map(|&b| bles[b].inputs.iter().copied()).filter(|s| !outs.contains(s)).collect();
                        ensure!(ins.len() <= p.i() as usize, "CLB uses {} inputs, above i={}", ins.len(), p.i());
                        clb.iter().for_each(|&b| seen[b] += 1);
                    }
                    ensure!(seen.iter().all(|&c| c == 1), "packing lost or duplicated a BLE");
                    packs += 1;
                }
            }
        }
    }
    Ok(format!(
        "{modules} modules x k=2..6: {exhaustive} exhaustive, {random} random (>= {MIN_VECTORS} vectors, {MIN_CYCLES} cycles) checks, 0 mismatches; {packs} packings within n and i"
    ))
}

fn end_to_end() -> Outcome {
    let dir = std::env::temp_dir().join(format!("arianna-acceptance-{}", std::process::id()));
    let mut runs = 0;
    for (name, d) in corpus_designs() {
        for (label, mut cfg) in [("cfg1", FlowConfig::cfg1(all_outputs(&d))), ("cfg2", FlowConfig::cfg2(all_outputs(&d)))] {
            let out = dir.join(format!("{name}-{label}"));
            cfg.out_dir = Some(out.clone());
            let o = run_flow_on(&d, &cfg).map_err(|e| format!("{name} {label}: {e}"))?;
            let v = o.verification.as_ref().ok_or("verification skipped")?;
            ensure!(v.equivalent(), "{name} {label}: {:?}", v.mismatch);
            ensure!(v.exhaustive || v.vectors >= MIN_VECTORS, "{name} {label}: only {} vectors", v.vectors);
            ensure!(o.selected().fabrics.len() <= cfg.max_efpgas, "{name} {label}: too many eFPGAs");
            // modules whose every instance went into a shell must be gone
            let members: BTreeSet<&InstancePath> = o.units.iter().flat_map(|u| &u.wrapper.cluster.members).collect();
            let tree = d.tree();
            let mut instances: HashMap<&str, Vec<&InstancePath>> = HashMap::new();
            for p in tree.paths() {
                instances.entry(tree.module_of(p).unwrap()).or_default().push(p);
            }
            let text = std::fs::read_to_string(out.join("top_redacted.v")).map_err(|e| e.to_string())?;
            let emitted = parse_verilog(&text).map_err(|e| format!("{name} {label}: re-parse: {e}"))?;
            let redacted_tree = emitted.tree();
            for m in &members {
                ensure!(!redacted_tree.contains(m), "{name} {label}: {m} survived");
                let module = tree.module_of(m).unwrap();
                let all_gone = instances[module].iter().all(|p| members.iter().any(|x| *x == *p || x.is_ancestor_of(p)));
                if all_gone {
                    ensure!(emitted.module(module).is_none(), "{name} {label}: module {module} still emitted");
                    ensure!(!text.contains(&format!("module {module} ")), "{name} {label}: text still defines {module}");
                }
            }
            runs += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{runs} corpus flows (cfg1 and cfg2) equivalent after redaction; redacted module bodies absent"))
}

fn eq1_exactness() -> Outcome {
    let cases = [((1.0, 1.0), (1.0, 1.0), 0.0), ((0.5, 1.0), (1.0, 1.0), 0.5), ((0.62, 1.0), (1.0, 1.0), 0.38)];
    let mut shown = Vec::new();
    for ((io, clb), (mio, mclb), want) in cases {
        let ctx = FabricScoreContext::new(mio, mclb).map_err(|e| e.to_string())?;
        let t = score_utils(io, clb, &ctx);
        ensure!((t - want).abs() <= SCORE_TOLERANCE, "T({io}, {clb}) = {t}, expected {want}");
        shown.push(format!("T({io:.2},{clb:.2})={t:.12}"));
    }
    Ok(format!("{} within {SCORE_TOLERANCE:e}", shown.join(", ")))
}

fn selection_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut total = 0;
    for round in 0..100 {
        let pool = rng.gen_range(3..=10);
        let count = rng.gen_range(1..=12);
        let sets: Vec<Vec<InstancePath>> = (0..count)
            .map(|_| {
                let mut s: BTreeSet<usize> = (0..pool).filter(|_| rng.gen_bool(0.3)).collect();
                if s.is_empty() {
                    s.insert(rng.gen_range(0..pool));
                }
                s.into_iter().map(|i| InstancePath::new(format!("top.u{i}"))).collect()
            })
            .collect();
        let max = rng.gen_range(1..=4);
        let got = enumerate_solutions(&sets, max);
        for s in &got {
            ensure!(!s.is_empty() && s.len() <= max, "round {round}: bad cardinality");
            let mut seen = BTreeSet::new();
            ensure!(s.iter().flat_map(|&i| &sets[i]).all(|p| seen.insert(p)), "round {round}: overlap");
        }
        let mut brute = BTreeSet::new();
        for mask in 1u32..1 << count {
            let pick: Vec<usize> = (0..count).filter(|i| mask >> i & 1 == 1).collect();
            let mut seen = BTreeSet::new();
            if pick.len() <= max && pick.iter().flat_map(|&i| &sets[i]).all(|p| seen.insert(p)) {
                brute.insert(pick);
            }
        }
        let got_set: BTreeSet<Vec<usize>> = got.iter().cloned().collect();
        ensure!(got_set.len() == got.len() && got_set == brute, "round {round}: differs from brute force");
        total += got.len();
    }
    Ok(format!("100 random structures, {total} solutions, all disjoint and within max_efpgas; equal to brute force"))
}

fn grid_calibration() -> Outcome {
    let p = FabricParams::new(4, 4);
    ensure!(p.capacity(4) == 64, "capacity(4) = {}", p.capacity(4));
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let (clb, io) = (rng.gen_range(0..500u32), rng.gen_range(0..400u32));
        let w = size_grid(clb, io, &p);
        let fits = |w: u32| w * w >= clb.max(1) && p.capacity(w) >= io;
        let least = (1..).find(|&w| fits(w)).unwrap();
        ensure!(w == least, "size_grid({clb}, {io}) = {w}, least feasible is {least}");
    }
    Ok("capacity(4) = 64; size_grid minimal on 1000 random (clb_count, io_used) pairs".into())
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let d = des3();
    let dir = std::env::temp_dir().join(format!("arianna-determinism-{}", std::process::id()));
    let mut outputs = Vec::new();
    for workers in [1usize, 8, 1, 8] {
        let out = dir.join(format!("run{}", outputs.len()));
        let mut cfg = FlowConfig::cfg1(vec!["out".into()]);
        cfg.workers = Some(workers);
        cfg.seed = 5;
        cfg.out_dir = Some(out.clone());
        run_flow_on(&d, &cfg).map_err(|e| e.to_string())?;
        outputs.push(read_dir(&out));
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure!(outputs.windows(2).all(|w| w[0] == w[1]), "artifacts differ between runs");
    Ok(format!("4 flow runs (workers 1, 8, 1, 8) wrote identical bytes in {} files", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("cluster-count", cluster_count),
        ("heuristic-parity", heuristic_parity),
        ("mapping-correctness", mapping_correctness),
        ("end-to-end-preservation", end_to_end),
        ("score-exactness", eq1_exactness),
        ("selection-soundness", selection_soundness),
        ("grid-calibration", grid_calibration),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match r {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
