// SPDX-License-Identifier: Apache-2.0
//! End-to-end orchestration: filter, cluster, explore, select, rewrite.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::clustering::{build_wrapper, clusters_csv, identify_clusters, Cluster, ClusterError, WrapperModule};
use crate::config::FlowConfig;
use crate::dataflow::{candidates_csv, Assessment, ConeGraph, DataflowError, FilterParams};
use crate::dse::{self, DseConfig, DseOutcome, Strategy, WrapperOracle};
use crate::equiv::{self, EquivOptions, EquivReport};
use crate::fabric::{Characterizer, FabricError, FabricParams, FabricResult};
use crate::ir::{flatten, parse_json_ir, parse_verilog, parse_verilog_with_top, Design, IrError};
use crate::rewriter::{self, RedactedDesign, RedactionPlan, RedactionUnit, RewriteError};
use crate::selection::{
    enumerate_solutions, rank, solutions_csv, FabricCandidate, FabricScoreContext, SelectionError, Solution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Config,
    Load,
    Filter,
    Cluster,
    Dse,
    Select,
    Rewrite,
    Verify,
    Emit,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Config => "config",
            Phase::Load => "load",
            Phase::Filter => "filter",
            Phase::Cluster => "cluster",
            Phase::Dse => "dse",
            Phase::Select => "select",
            Phase::Rewrite => "rewrite",
            Phase::Verify => "verify",
            Phase::Emit => "emit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("[{phase}] {message}")]
pub struct FlowError {
    pub phase: Phase,
    pub message: String,
}

impl FlowError {
    pub fn new(phase: Phase, message: impl fmt::Display) -> Self {
        Self { phase, message: message.to_string() }
    }
}

fn at<E: fmt::Display>(phase: Phase) -> impl Fn(E) -> FlowError {
    move |e| FlowError::new(phase, e)
}

/// Reads the configured inputs: one JSON netlist, or Verilog files
/// concatenated in order.
pub fn load_design(inputs: &[PathBuf], top: Option<&str>) -> Result<Design, FlowError> {
    if inputs.is_empty() {
        return Err(FlowError::new(Phase::Config, "no input files"));
    }
    let mut text = String::new();
    for p in inputs {
        let t = std::fs::read_to_string(p).map_err(|e| FlowError::new(Phase::Load, format!("{}: {e}", p.display())))?;
        text.push_str(&t);
        text.push('\n');
    }
    let is_json = inputs.len() == 1 && inputs[0].extension().is_some_and(|e| e == "json");
    let parsed: Result<Design, IrError> = if is_json {
        parse_json_ir(&text).and_then(|d| match top {
            Some(t) if t != d.top() => d.with_top(t),
            _ => Ok(d),
        })
    } else {
        match top {
            Some(t) => parse_verilog_with_top(&text, t),
            None => parse_verilog(&text),
        }
    };
    parsed.map_err(at(Phase::Load))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, FlowError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    b.build().map_err(at(Phase::Config))
}

/// Everything a flow run produced, in memory.
pub struct FlowOutcome {
    pub assessments: Vec<Assessment>,
    pub clusters: Vec<Cluster>,
    pub dse: Vec<DseOutcome<FabricResult>>,
    /// Clusters with a feasible fabric, and their wrappers.
    pub fabrics: Vec<FabricCandidate>,
    pub wrappers: Vec<WrapperModule>,
    /// Best first.
    pub solutions: Vec<Solution>,
    pub units: Vec<RedactionUnit>,
    pub plan: RedactionPlan,
    pub redacted: RedactedDesign,
    pub verification: Option<EquivReport>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl FlowOutcome {
    pub fn kept_candidates(&self) -> usize {
        self.assessments.iter().filter(|a| a.kept).count()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.dse.iter().map(|d| d.oracle_calls as u64).sum()
    }

    pub fn selected(&self) -> &Solution {
        &self.solutions[0]
    }
}

/// Loads the configured inputs and runs the flow.
pub fn run_flow(cfg: &FlowConfig) -> Result<FlowOutcome, FlowError> {
    cfg.validate().map_err(at(Phase::Config))?;
    let design = load_design(&cfg.inputs, cfg.top.as_deref())?;
    run_flow_on(&design, cfg)
}

pub fn run_flow_on(design: &Design, cfg: &FlowConfig) -> Result<FlowOutcome, FlowError> {
    cfg.validate().map_err(at(Phase::Config))?;
    pool(cfg.workers)?.install(|| flow_inner(design, cfg))
}

struct Explored {
    assessments: Vec<Assessment>,
    clusters: Vec<Cluster>,
    wrappers: Vec<WrapperModule>,
}

fn explore_front(design: &Design, cfg: &FlowConfig) -> Result<Explored, FlowError> {
    let filter = FilterParams {
        max_io: cfg.max_io,
        selected_outputs: cfg.selected_outputs.clone(),
        score_threshold: cfg.score_threshold,
        top_k: cfg.top_k,
    };
    let graph = ConeGraph::new(design).map_err(at::<DataflowError>(Phase::Filter))?;
    let assessments = graph.assess(&filter).map_err(at(Phase::Filter))?;
    let candidates: Vec<_> = assessments.iter().filter(|a| a.kept).map(|a| a.candidate.clone()).collect();
    if candidates.is_empty() {
        return Err(FlowError::new(Phase::Filter, "no candidates: no module passes the output and I/O filters"));
    }
    let clusters = identify_clusters(&candidates, cfg.max_io, cfg.cluster_cap).map_err(at(Phase::Cluster))?;
    let wrappers = clusters
        .par_iter()
        .map(|c| build_wrapper(design, c))
        .collect::<Result<Vec<_>, ClusterError>>()
        .map_err(at(Phase::Cluster))?;
    Ok(Explored { assessments, clusters, wrappers })
}

fn search(
    ch: &Characterizer,
    wrappers: &[WrapperModule],
    base: FabricParams,
    dse_cfg: &DseConfig,
) -> Result<Vec<DseOutcome<FabricResult>>, FlowError> {
    wrappers
        .par_iter()
        .map(|w| dse::run(&WrapperOracle { characterizer: ch, wrapper: w, base }, dse_cfg))
        .collect::<Result<Vec<_>, FabricError>>()
        .map_err(at(Phase::Dse))
}

fn flow_inner(design: &Design, cfg: &FlowConfig) -> Result<FlowOutcome, FlowError> {
    let Explored { assessments, clusters, wrappers } = explore_front(design, cfg)?;
    let ch = Characterizer::new(cfg.cut_limit);
    let base = cfg.base_params();
    let outcomes = search(&ch, &wrappers, base, &cfg.dse())?;

    let mut fabrics = Vec::new();
    let mut kept_wrappers = Vec::new();
    for ((c, w), o) in clusters.iter().zip(&wrappers).zip(&outcomes) {
        if let Some(ch) = &o.chosen {
            fabrics.push(FabricCandidate { cluster: c.clone(), params: ch.result.params, result: ch.result.clone() });
            kept_wrappers.push(w.clone());
        }
    }
    if fabrics.is_empty() {
        return Err(FlowError::new(
            Phase::Dse,
            format!("no feasible fabric: every cluster needs a grid wider than {}", cfg.max_grid_side),
        ));
    }
    let ctx = FabricScoreContext::from_results(fabrics.iter().map(|f| &f.result)).map_err(at(Phase::Select))?;
    let mut solutions: Vec<Solution> = enumerate_solutions(&fabrics, cfg.max_efpgas)
        .into_par_iter()
        .map(|s| Solution::build(s, &fabrics, &ctx))
        .collect();
    if solutions.is_empty() {
        return Err(FlowError::new(Phase::Select, SelectionError::Empty));
    }
    rank(&mut solutions, &fabrics);

    let units: Vec<RedactionUnit> = solutions[0]
        .fabrics
        .iter()
        .map(|&f| RedactionUnit { wrapper: kept_wrappers[f].clone(), result: fabrics[f].result.clone() })
        .collect();
    let plan = rewriter::plan_redaction(design, &units).map_err(at::<RewriteError>(Phase::Rewrite))?;
    let redacted = rewriter::apply_redaction(design, &plan, &units).map_err(at(Phase::Rewrite))?;

    let mut warnings = Vec::new();
    if let Some(min) = cfg.secure_min_side {
        for u in &units {
            if u.result.grid_side < min {
                warnings.push(format!(
                    "eFPGA for `{}` has a {}x{} grid, below the secure minimum side {min}",
                    u.wrapper.cluster.id, u.result.grid_side, u.result.grid_side
                ));
            }
        }
    }

    let verification = if cfg.verify {
        let a = flatten(design, design.top()).map_err(at(Phase::Verify))?;
        let b = redacted.configured(&units).map_err(at(Phase::Verify))?;
        let opts = EquivOptions { seed: cfg.seed, ..EquivOptions::default() };
        let r = equiv::check(&a, &b, &opts).map_err(at(Phase::Verify))?;
        if let Some(m) = &r.mismatch {
            return Err(FlowError::new(
                Phase::Verify,
                format!("redacted design differs on output `{}` bit {} at cycle {}", m.output, m.bit, m.cycle),
            ));
        }
        Some(r)
    } else {
        None
    };

    let mut outcome = FlowOutcome {
        assessments,
        clusters,
        dse: outcomes,
        fabrics,
        wrappers: kept_wrappers,
        solutions,
        units,
        plan,
        redacted,
        verification,
        warnings,
        files: Vec::new(),
    };
    if let Some(dir) = &cfg.out_dir {
        outcome.files = write_artifacts(design, cfg, &outcome, dir)?;
    }
    Ok(outcome)
}

fn dse_csv(clusters: &[Cluster], outcomes: &[DseOutcome<FabricResult>], strategy: Strategy) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cluster_id", "strategy", "oracle_calls", "probe_W", "status", "n", "k", "W", "lut_count", "clb_count",
        "clb_util", "io_util", "area", "bitstream_bits",
    ])
    .unwrap();
    for (c, o) in clusters.iter().zip(outcomes) {
        let probe = probe_side(o, strategy);
        let mut row = vec![c.id.clone(), strategy.to_string(), o.oracle_calls.to_string(), probe.to_string()];
        match &o.chosen {
            Some(e) => {
                let r = &e.result;
                row.extend([
                    "chosen".to_string(),
                    e.n.to_string(),
                    e.k.to_string(),
                    r.grid_side.to_string(),
                    r.lut_count.to_string(),
                    r.clb_count.to_string(),
                    format!("{:.6}", r.clb_util),
                    format!("{:.6}", r.io_util),
                    format!("{:.3}", r.area_estimate),
                    r.bitstream_bits.to_string(),
                ]);
            }
            None => row.extend(std::iter::once("discarded".to_string()).chain(std::iter::repeat_n(String::new(), 9))),
        }
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Grid side at the top corner of the range.
fn probe_side(o: &DseOutcome<FabricResult>, strategy: Strategy) -> u32 {
    match strategy {
        Strategy::Exhaustive => o.evaluations.last().map(|e| e.result.grid_side).unwrap_or(0),
        _ => o.evaluations.first().map(|e| e.result.grid_side).unwrap_or(0),
    }
}

fn write_artifacts(design: &Design, cfg: &FlowConfig, o: &FlowOutcome, dir: &Path) -> Result<Vec<PathBuf>, FlowError> {
    let mut files = rewriter::emit(design, &o.plan, &o.redacted, &o.units, dir).map_err(at(Phase::Emit))?;
    let dse_cfg = cfg.dse();
    let reports = [
        ("candidates.csv", candidates_csv(&o.assessments)),
        ("clusters.csv", clusters_csv(&o.clusters)),
        ("dse.csv", dse_csv(&o.clusters, &o.dse, cfg.strategy)),
        ("heatmap.csv", dse::heatmap_csv(&dse::heatmap(&dse_cfg, &o.dse))),
        ("solutions.csv", solutions_csv(&o.solutions, &o.fabrics)),
        ("report.json", rewriter::pretty(&flow_report(design, cfg, o))),
    ];
    for (name, text) in reports {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| FlowError::new(Phase::Emit, format!("{}: {e}", path.display())))?;
        files.push(path);
    }
    Ok(files)
}

fn flow_report(design: &Design, cfg: &FlowConfig, o: &FlowOutcome) -> serde_json::Value {
    let sel = o.selected();
    serde_json::json!({
        "top": design.top(),
        "strategy": cfg.strategy.to_string(),
        "max_io": cfg.max_io,
        "max_efpgas": cfg.max_efpgas,
        "instances": design.tree().len() - 1,
        "candidates": o.kept_candidates(),
        "clusters": o.clusters.len(),
        "feasible_fabrics": o.fabrics.len(),
        "solutions": o.solutions.len(),
        "oracle_calls": o.oracle_calls(),
        "selected": {
            "clusters": sel.cluster_ids(&o.fabrics),
            "mean_score": sel.mean_score,
            "total_score": sel.total_score,
            "redacted_instances": sel.redacted_instances,
            "total_area": sel.total_area,
        },
        "verification": o.verification.as_ref().map(|v| serde_json::json!({
            "exhaustive": v.exhaustive,
            "vectors": v.vectors,
            "equivalent": v.equivalent(),
        })),
        "warnings": o.warnings,
    })
}

/// One cluster under every strategy plus the fixed (4, 4) baseline.
#[derive(Debug, Clone)]
pub struct ClusterComparison {
    pub cluster: Cluster,
    pub nk: DseOutcome<FabricResult>,
    pub kn: DseOutcome<FabricResult>,
    pub exhaustive: DseOutcome<FabricResult>,
    pub fixed: FabricResult,
}

impl ClusterComparison {
    pub fn probe_side(&self) -> u32 {
        self.nk.evaluations[0].result.grid_side
    }

    /// The exhaustive optimum sits on a larger grid than the probe's.
    pub fn nonminimal_optimum(&self) -> bool {
        self.exhaustive.chosen.as_ref().is_some_and(|c| c.result.grid_side > self.probe_side())
    }
}

pub struct CompareOutcome {
    pub rows: Vec<ClusterComparison>,
    pub dse: DseConfig,
    pub files: Vec<PathBuf>,
}

impl CompareOutcome {
    pub fn calls(&self, f: impl Fn(&ClusterComparison) -> u32) -> u64 {
        self.rows.iter().map(|r| f(r) as u64).sum()
    }
}

pub const FIXED_BASELINE: (u32, u32) = (4, 4);

pub fn run_compare(cfg: &FlowConfig) -> Result<CompareOutcome, FlowError> {
    cfg.validate().map_err(at(Phase::Config))?;
    let design = load_design(&cfg.inputs, cfg.top.as_deref())?;
    run_compare_on(&design, cfg)
}

pub fn run_compare_on(design: &Design, cfg: &FlowConfig) -> Result<CompareOutcome, FlowError> {
    cfg.validate().map_err(at(Phase::Config))?;
    pool(cfg.workers)?.install(|| {
        let Explored { clusters, wrappers, .. } = explore_front(design, cfg)?;
        let ch = Characterizer::new(cfg.cut_limit);
        let base = cfg.base_params();
        let with = |s: Strategy| DseConfig { strategy: s, ..cfg.dse() };
        let nk = search(&ch, &wrappers, base, &with(Strategy::Nk))?;
        let kn = search(&ch, &wrappers, base, &with(Strategy::Kn))?;
        let ex = search(&ch, &wrappers, base, &with(Strategy::Exhaustive))?;
        let fixed = wrappers
            .par_iter()
            .map(|w| {
                let p = FabricParams { n: FIXED_BASELINE.0, k: FIXED_BASELINE.1, ..base };
                ch.characterize_keyed(&w.cluster.id, &w.design, &p)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(at(Phase::Dse))?;
        let rows: Vec<ClusterComparison> = clusters
            .into_iter()
            .zip(nk)
            .zip(kn)
            .zip(ex)
            .zip(fixed)
            .map(|((((cluster, nk), kn), exhaustive), fixed)| ClusterComparison { cluster, nk, kn, exhaustive, fixed })
            .collect();
        let mut out = CompareOutcome { rows, dse: cfg.dse(), files: Vec::new() };
        if let Some(dir) = &cfg.out_dir {
            out.files = write_compare(&out, dir)?;
        }
        Ok(out)
    })
}

fn relative(area: Option<f64>, best: Option<f64>) -> Option<f64> {
    match (area, best) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

pub fn compare_csv(out: &CompareOutcome) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cluster_id", "probe_W", "nk_n", "nk_k", "nk_W", "nk_area", "nk_calls", "kn_n", "kn_k", "kn_W", "kn_area",
        "kn_calls", "ex_n", "ex_k", "ex_W", "ex_area", "ex_calls", "fixed_W", "fixed_area", "nk_rel", "kn_rel",
        "fixed_rel", "ex_nonminimal_W",
    ])
    .unwrap();
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &out.rows {
        let mut row = vec![r.cluster.id.clone(), r.probe_side().to_string()];
        for o in [&r.nk, &r.kn, &r.exhaustive] {
            let c = o.chosen.as_ref();
            row.push(opt(c.map(|c| c.n.to_string())));
            row.push(opt(c.map(|c| c.k.to_string())));
            row.push(opt(c.map(|c| c.result.grid_side.to_string())));
            row.push(opt(c.map(|c| format!("{:.3}", c.result.area_estimate))));
            row.push(o.oracle_calls.to_string());
        }
        row.push(r.fixed.grid_side.to_string());
        row.push(format!("{:.3}", r.fixed.area_estimate));
        let best = r.exhaustive.chosen.as_ref().map(|c| c.result.area_estimate);
        for a in [
            r.nk.chosen.as_ref().map(|c| c.result.area_estimate),
            r.kn.chosen.as_ref().map(|c| c.result.area_estimate),
            Some(r.fixed.area_estimate),
        ] {
            row.push(opt(relative(a, best).map(|x| format!("{x:.6}"))));
        }
        row.push(r.nonminimal_optimum().to_string());
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn compare_summary(out: &CompareOutcome) -> serde_json::Value {
    let stats = |f: &dyn Fn(&ClusterComparison) -> Option<f64>| {
        let v: Vec<f64> = out.rows.iter().filter_map(f).collect();
        let (mean, std) = dse::mean_std(&v);
        serde_json::json!({"count": v.len(), "mean": mean, "std": std})
    };
    let best = |r: &ClusterComparison| r.exhaustive.chosen.as_ref().map(|c| c.result.area_estimate);
    serde_json::json!({
        "clusters": out.rows.len(),
        "oracle_calls": {
            "nk": out.calls(|r| r.nk.oracle_calls),
            "kn": out.calls(|r| r.kn.oracle_calls),
            "exhaustive": out.calls(|r| r.exhaustive.oracle_calls),
            "fixed": out.rows.len(),
        },
        "relative_cost": {
            "nk": stats(&|r| relative(r.nk.chosen.as_ref().map(|c| c.result.area_estimate), best(r))),
            "kn": stats(&|r| relative(r.kn.chosen.as_ref().map(|c| c.result.area_estimate), best(r))),
            "fixed": stats(&|r| relative(Some(r.fixed.area_estimate), best(r))),
        },
        "nonminimal_exhaustive_optima": out.rows.iter().filter(|r| r.nonminimal_optimum()).count(),
    })
}

fn write_compare(out: &CompareOutcome, dir: &Path) -> Result<Vec<PathBuf>, FlowError> {
    std::fs::create_dir_all(dir).map_err(|e| FlowError::new(Phase::Emit, format!("{}: {e}", dir.display())))?;
    let sweeps: Vec<DseOutcome<FabricResult>> = out.rows.iter().map(|r| r.exhaustive.clone()).collect();
    let files = [
        ("compare.csv", compare_csv(out)),
        ("heatmap.csv", dse::heatmap_csv(&dse::heatmap(&out.dse, &sweeps))),
        ("compare_summary.json", rewriter::pretty(&compare_summary(out))),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| FlowError::new(Phase::Emit, format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::des3_like;

    #[test]
    fn no_candidates_is_a_filter_error() {
        let d = parse_verilog(
            "module inv(input a, output y); assign y = ~a; endmodule
             module top(input a, output y, output z); wire t; inv u(.a(a), .y(t)); assign y = a; assign z = ~a; endmodule",
        )
        .unwrap();
        let err = run_flow_on(&d, &FlowConfig::cfg1(vec!["y".into()])).err().unwrap();
        assert_eq!(err.phase, Phase::Filter);
        assert!(err.to_string().starts_with("[filter] no candidates"));
    }

    #[test]
    fn des3_presets() {
        let d = parse_verilog(&des3_like(false)).unwrap();
        let o1 = run_flow_on(&d, &FlowConfig::cfg1(vec!["out".into()])).unwrap();
        assert_eq!((o1.kept_candidates(), o1.clusters.len()), (8, 218));
        let o2 = run_flow_on(&d, &FlowConfig::cfg2(vec!["out".into()])).unwrap();
        assert_eq!(o2.clusters.len(), 255);
        assert_eq!(o2.selected().fabrics.len(), 1);
        assert!(o1.verification.as_ref().unwrap().equivalent());
        assert_eq!(o1.selected().fabrics.len(), 2);
        assert_eq!(o1.selected().redacted_instances, 8);
        assert_eq!(o2.selected().redacted_instances, 8);
    }
}
