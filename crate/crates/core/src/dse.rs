// SPDX-License-Identifier: Apache-2.0
//! Per-cluster fabric parameter search: NK and KN sweeps and the exhaustive
//! baseline.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::WrapperModule;
use crate::fabric::{Characterizer, FabricError, FabricParams, FabricResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Nk,
    Kn,
    Exhaustive,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "nk" => Ok(Self::Nk),
            "kn" => Ok(Self::Kn),
            "exhaustive" => Ok(Self::Exhaustive),
            other => Err(format!("unknown strategy `{other}` (expected nk, kn or exhaustive)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Nk => "nk",
            Self::Kn => "kn",
            Self::Exhaustive => "exhaustive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DseConfig {
    pub n_range: (u32, u32),
    pub k_range: (u32, u32),
    pub max_grid_side: u32,
    pub strategy: Strategy,
}

impl DseConfig {
    pub fn validate(&self) -> Result<(), FabricError> {
        let (n0, n1) = self.n_range;
        let (k0, k1) = self.k_range;
        if n0 < 1 || n0 > n1 {
            return Err(FabricError::Params(format!("bad n_range [{n0}, {n1}]")));
        }
        if k0 < 2 || k0 > k1 || k1 as usize > crate::truth::MAX_VARS {
            return Err(FabricError::Params(format!("bad k_range [{k0}, {k1}]")));
        }
        if self.max_grid_side < 1 {
            return Err(FabricError::Params("max_grid_side must be at least 1".into()));
        }
        Ok(())
    }

    /// Parameter grid in n-major order.
    pub fn points(&self) -> Vec<(u32, u32)> {
        let (n0, n1) = self.n_range;
        let (k0, k1) = self.k_range;
        (n0..=n1).flat_map(|n| (k0..=k1).map(move |k| (n, k))).collect()
    }
}

/// What the search needs from a characterization.
pub trait Characterized: Clone + Send + Sync {
    fn grid_side(&self) -> u32;
    fn area(&self) -> f64;
}

impl Characterized for FabricResult {
    fn grid_side(&self) -> u32 {
        self.grid_side
    }
    fn area(&self) -> f64 {
        self.area_estimate
    }
}

pub trait CostOracle: Sync {
    type Output: Characterized;
    fn evaluate(&self, n: u32, k: u32) -> Result<Self::Output, FabricError>;
}

/// Oracle backed by the fabric characterizer for one wrapper.
pub struct WrapperOracle<'a> {
    pub characterizer: &'a Characterizer,
    pub wrapper: &'a WrapperModule,
    /// Pad and area settings; `n` and `k` are overwritten per call.
    pub base: FabricParams,
}

impl CostOracle for WrapperOracle<'_> {
    type Output = FabricResult;
    fn evaluate(&self, n: u32, k: u32) -> Result<FabricResult, FabricError> {
        let params = FabricParams { n, k, ..self.base };
        self.characterizer.characterize_keyed(&self.wrapper.cluster.id, &self.wrapper.design, &params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation<R> {
    pub n: u32,
    pub k: u32,
    pub result: R,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DseOutcome<R> {
    pub chosen: Option<Evaluation<R>>,
    pub evaluations: Vec<Evaluation<R>>,
    pub oracle_calls: u32,
}

pub fn run<O: CostOracle>(oracle: &O, cfg: &DseConfig) -> Result<DseOutcome<O::Output>, FabricError> {
    match cfg.strategy {
        Strategy::Nk => run_nk(oracle, cfg),
        Strategy::Kn => run_kn(oracle, cfg),
        Strategy::Exhaustive => run_exhaustive(oracle, cfg),
    }
}

pub fn run_nk<O: CostOracle>(oracle: &O, cfg: &DseConfig) -> Result<DseOutcome<O::Output>, FabricError> {
    sweep(oracle, cfg, true)
}

pub fn run_kn<O: CostOracle>(oracle: &O, cfg: &DseConfig) -> Result<DseOutcome<O::Output>, FabricError> {
    sweep(oracle, cfg, false)
}

struct Trace<'o, O: CostOracle> {
    oracle: &'o O,
    evaluations: Vec<Evaluation<O::Output>>,
}

impl<O: CostOracle> Trace<'_, O> {
    fn eval(&mut self, n: u32, k: u32) -> Result<u32, FabricError> {
        let result = self.oracle.evaluate(n, k)?;
        let w = result.grid_side();
        self.evaluations.push(Evaluation { n, k, result });
        Ok(w)
    }
}

/// Probes (n_max, k_max) for the lower-bound side `s`, then lowers the first
/// parameter while the side stays `s`, then the second one.
fn sweep<O: CostOracle>(oracle: &O, cfg: &DseConfig, n_first: bool) -> Result<DseOutcome<O::Output>, FabricError> {
    cfg.validate()?;
    let mut t = Trace { oracle, evaluations: Vec::new() };
    let (mut n, mut k) = (cfg.n_range.1, cfg.k_range.1);
    let s = t.eval(n, k)?;
    if s > cfg.max_grid_side {
        return Ok(DseOutcome { chosen: None, oracle_calls: 1, evaluations: t.evaluations });
    }
    let mut best = 0;
    for phase in 0..2 {
        let sweep_n = (phase == 0) == n_first;
        loop {
            let (floor, cur) = if sweep_n { (cfg.n_range.0, n) } else { (cfg.k_range.0, k) };
            if cur == floor {
                break;
            }
            let (tn, tk) = if sweep_n { (n - 1, k) } else { (n, k - 1) };
            // a side other than s ends the sweep; the previous value is kept
            if t.eval(tn, tk)? != s {
                break;
            }
            (n, k) = (tn, tk);
            best = t.evaluations.len() - 1;
        }
    }
    let chosen = t.evaluations[best].clone();
    Ok(DseOutcome { chosen: Some(chosen), oracle_calls: t.evaluations.len() as u32, evaluations: t.evaluations })
}

/// Every grid point; the feasible one of least area wins, ties broken by
/// side, then n, then k.
pub fn run_exhaustive<O: CostOracle>(oracle: &O, cfg: &DseConfig) -> Result<DseOutcome<O::Output>, FabricError> {
    cfg.validate()?;
    let evaluations = cfg
        .points()
        .into_par_iter()
        .map(|(n, k)| oracle.evaluate(n, k).map(|result| Evaluation { n, k, result }))
        .collect::<Result<Vec<_>, _>>()?;
    let chosen = evaluations
        .iter()
        .filter(|e| e.result.grid_side() <= cfg.max_grid_side)
        .min_by(|a, b| {
            a.result
                .area()
                .total_cmp(&b.result.area())
                .then(a.result.grid_side().cmp(&b.result.grid_side()))
                .then(a.n.cmp(&b.n))
                .then(a.k.cmp(&b.k))
        })
        .cloned();
    Ok(DseOutcome { chosen, oracle_calls: evaluations.len() as u32, evaluations })
}

/// Per-(n, k) statistics over exhaustive sweeps: how often each point is the
/// optimum, and its area relative to the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapRow {
    pub n: u32,
    pub k: u32,
    pub best_count: u32,
    pub mean_relative_cost: f64,
    pub std_relative_cost: f64,
}

pub fn heatmap<R: Characterized>(cfg: &DseConfig, sweeps: &[DseOutcome<R>]) -> Vec<HeatmapRow> {
    let mut ratios: BTreeMap<(u32, u32), Vec<f64>> = cfg.points().into_iter().map(|p| (p, Vec::new())).collect();
    let mut best: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for s in sweeps {
        let Some(c) = &s.chosen else { continue };
        *best.entry((c.n, c.k)).or_default() += 1;
        let base = c.result.area();
        for e in &s.evaluations {
            if let Some(v) = ratios.get_mut(&(e.n, e.k)) {
                v.push(if base > 0.0 { e.result.area() / base } else { 1.0 });
            }
        }
    }
    ratios
        .into_iter()
        .map(|((n, k), v)| {
            let (mean, std) = mean_std(&v);
            HeatmapRow { n, k, best_count: best.get(&(n, k)).copied().unwrap_or(0), mean_relative_cost: mean, std_relative_cost: std }
        })
        .collect()
}

/// Population mean and standard deviation; zeros when empty.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

pub fn heatmap_csv(rows: &[HeatmapRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "k", "best_count", "mean_relative_cost", "std_relative_cost"]).unwrap();
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.best_count.to_string(),
            format!("{:.6}", r.mean_relative_cost),
            format!("{:.6}", r.std_relative_cost),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicU32, Ordering};

    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Point {
        w: u32,
        area: f64,
    }

    impl Characterized for Point {
        fn grid_side(&self) -> u32 {
            self.w
        }
        fn area(&self) -> f64 {
            self.area
        }
    }

    struct Synthetic<F: Fn(u32, u32) -> u32 + Sync> {
        side: F,
        calls: AtomicU32,
    }

    impl<F: Fn(u32, u32) -> u32 + Sync> Synthetic<F> {
        fn new(side: F) -> Self {
            Self { side, calls: AtomicU32::new(0) }
        }
    }

    impl<F: Fn(u32, u32) -> u32 + Sync> CostOracle for Synthetic<F> {
        type Output = Point;
        fn evaluate(&self, n: u32, k: u32) -> Result<Point, FabricError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let w = (self.side)(n, k);
            Ok(Point { w, area: (w * w) as f64 * FabricParams::new(n, k).tile_area() })
        }
    }

    fn cfg(n: (u32, u32), k: (u32, u32), s: u32, strategy: Strategy) -> DseConfig {
        DseConfig { n_range: n, k_range: k, max_grid_side: s, strategy }
    }

    fn chosen<R>(o: &DseOutcome<R>) -> Option<(u32, u32)> {
        o.chosen.as_ref().map(|c| (c.n, c.k))
    }

    #[test]
    fn monotone_oracle() {
        let oracle = Synthetic::new(|n, k| if n >= 2 && k >= 3 { 4 } else { 5 });
        let (n_max, k_max) = (8, 6);
        for strategy in [Strategy::Nk, Strategy::Kn] {
            let out = run(&oracle, &cfg((1, n_max), (2, k_max), 6, strategy)).unwrap();
            assert_eq!(chosen(&out), Some((2, 3)));
            assert_eq!(out.oracle_calls, 1 + (n_max - 1) + (k_max - 2));
        }
    }

    #[test]
    fn lower_bound_too_big() {
        let oracle = Synthetic::new(|_, _| 9);
        let out = run_nk(&oracle, &cfg((1, 4), (2, 4), 8, Strategy::Nk)).unwrap();
        assert_eq!((out.chosen, out.oracle_calls), (None, 1));
    }

    #[test]
    fn single_point() {
        let oracle = Synthetic::new(|_, _| 3);
        let c = cfg((5, 5), (4, 4), 8, Strategy::Nk);
        let nk = run_nk(&oracle, &c).unwrap();
        assert_eq!((chosen(&nk), nk.oracle_calls), (Some((5, 4)), 1));
        assert_eq!(nk, run_kn(&oracle, &c).unwrap());
    }

    #[test]
    fn two_ridges_split_nk_and_kn() {
        // side stays 4 on {n >= 3} and on {k >= 5}; elsewhere 5
        let oracle = Synthetic::new(|n, k| if n >= 3 || k >= 5 { 4 } else { 5 });
        let c = cfg((1, 6), (2, 6), 8, Strategy::Nk);
        let nk = run_nk(&oracle, &c).unwrap();
        let kn = run_kn(&oracle, &c).unwrap();
        assert_eq!(chosen(&nk), Some((1, 5)));
        assert_eq!(chosen(&kn), Some((3, 2)));
        assert_eq!(nk.chosen.unwrap().result.w, 4);
        assert_eq!(kn.chosen.unwrap().result.w, 4);
    }

    #[test]
    fn exhaustive_cardinality_and_tiebreak() {
        let oracle = Synthetic::new(|_, _| 1);
        let out = run_exhaustive(&oracle, &cfg((1, 2), (2, 3), 4, Strategy::Exhaustive)).unwrap();
        assert_eq!(out.oracle_calls, 4);
        assert_eq!(oracle.calls.load(Ordering::Relaxed), 4);
        assert_eq!(chosen(&out), Some((1, 2)));
        let order: Vec<(u32, u32)> = out.evaluations.iter().map(|e| (e.n, e.k)).collect();
        assert_eq!(order, [(1, 2), (1, 3), (2, 2), (2, 3)]);
    }

    #[test]
    fn exhaustive_may_prefer_a_larger_grid() {
        // side 6 needs n >= 3; a 7x7 grid of the smallest tiles is cheaper
        let oracle = Synthetic::new(|n, _| if n >= 3 { 6 } else { 7 });
        let c = cfg((1, 4), (2, 4), 8, Strategy::Exhaustive);
        let ex = run_exhaustive(&oracle, &c).unwrap();
        assert_eq!(chosen(&ex), Some((1, 2)));
        let nk = run_nk(&oracle, &c).unwrap();
        assert_eq!(chosen(&nk), Some((3, 2)));
        assert_eq!(nk.chosen.as_ref().unwrap().result.w, 6);
        assert!(nk.chosen.unwrap().result.area > ex.chosen.unwrap().result.area);
    }

    #[test]
    fn heatmap_rows_cover_the_grid() {
        let oracle = Synthetic::new(|_, _| 2);
        let c = cfg((1, 3), (2, 4), 4, Strategy::Exhaustive);
        let sweeps = vec![run_exhaustive(&oracle, &c).unwrap()];
        let rows = heatmap(&c, &sweeps);
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].best_count, 1);
        assert_eq!(rows[0].mean_relative_cost, 1.0);
        assert_eq!(heatmap_csv(&rows).lines().count(), 10);
    }
}
