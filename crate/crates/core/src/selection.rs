// SPDX-License-Identifier: Apache-2.0
//! Fabric scoring, enumeration of non-overlapping eFPGA sets, and final
//! ranking.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clustering::Cluster;
use crate::fabric::{FabricParams, FabricResult};
use crate::ir::InstancePath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("degenerate score context: maxima must be positive (io {io}, clb {clb})")]
    ZeroMaxima { io: f64, clb: f64 },
    #[error("no solutions to rank")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FabricScoreContext {
    pub max_io_util: f64,
    pub max_clb_util: f64,
}

impl FabricScoreContext {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a FabricResult>) -> Result<Self, SelectionError> {
        let (mut io, mut clb) = (0.0f64, 0.0f64);
        for r in results {
            io = io.max(r.io_util);
            clb = clb.max(r.clb_util);
        }
        Self::new(io, clb)
    }

    pub fn new(max_io_util: f64, max_clb_util: f64) -> Result<Self, SelectionError> {
        if max_io_util > 0.0 && max_clb_util > 0.0 {
            Ok(Self { max_io_util, max_clb_util })
        } else {
            Err(SelectionError::ZeroMaxima { io: max_io_util, clb: max_clb_util })
        }
    }
}

/// Relative shortfall from the best I/O and CLB utilizations. Lower is
/// better; 0 at both maxima.
pub fn score_utils(io_util: f64, clb_util: f64, ctx: &FabricScoreContext) -> f64 {
    (ctx.max_io_util - io_util) / ctx.max_io_util + (ctx.max_clb_util - clb_util) / ctx.max_clb_util
}

pub fn score_fabric(result: &FabricResult, ctx: &FabricScoreContext) -> f64 {
    score_utils(result.io_util, result.clb_util, ctx)
}

/// A characterized cluster that survived the search.
#[derive(Debug, Clone, PartialEq)]
pub struct FabricCandidate {
    pub cluster: Cluster,
    pub params: FabricParams,
    pub result: FabricResult,
}

pub trait Members {
    fn members(&self) -> &[InstancePath];
}

impl Members for Cluster {
    fn members(&self) -> &[InstancePath] {
        &self.members
    }
}

impl Members for FabricCandidate {
    fn members(&self) -> &[InstancePath] {
        &self.cluster.members
    }
}

impl Members for Vec<InstancePath> {
    fn members(&self) -> &[InstancePath] {
        self
    }
}

/// Every non-empty set of pairwise instance-disjoint fabrics with at most
/// `max_efpgas` members, as ascending index lists. An instance overlaps
/// its own descendants, since redacting it takes them too. Depth-first
/// from the empty solution; a branch closes when it is full or no
/// remaining fabric is disjoint from it.
pub fn enumerate_solutions<T: Members + Sync>(fabrics: &[T], max_efpgas: usize) -> Vec<Vec<usize>> {
    let n = fabrics.len();
    let overlaps = |a: &[InstancePath], b: &[InstancePath]| {
        a.iter().any(|x| b.iter().any(|y| x == y || x.is_ancestor_of(y) || y.is_ancestor_of(x)))
    };
    let conflicts: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| i != j && overlaps(fabrics[i].members(), fabrics[j].members())).collect())
        .collect();
    let mut out = Vec::new();
    let mut work = Vec::new();
    grow(&conflicts, max_efpgas, 0, &mut work, &mut out);
    out
}

fn grow(conflicts: &[Vec<bool>], max: usize, from: usize, work: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if work.len() == max {
        return;
    }
    for f in from..conflicts.len() {
        if work.iter().any(|&w| conflicts[w][f]) {
            continue;
        }
        work.push(f);
        out.push(work.clone());
        grow(conflicts, max, f + 1, work, out);
        work.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    /// Indices into the candidate list, ascending.
    pub fabrics: Vec<usize>,
    pub total_score: f64,
    pub mean_score: f64,
    pub redacted_instances: usize,
    pub total_area: f64,
}

impl Solution {
    pub fn build(fabrics: Vec<usize>, candidates: &[FabricCandidate], ctx: &FabricScoreContext) -> Self {
        let total_score: f64 = fabrics.iter().map(|&f| score_fabric(&candidates[f].result, ctx)).sum();
        Self {
            mean_score: if fabrics.is_empty() { 0.0 } else { total_score / fabrics.len() as f64 },
            redacted_instances: fabrics.iter().map(|&f| candidates[f].cluster.members.len()).sum(),
            total_area: fabrics.iter().map(|&f| candidates[f].result.area_estimate).sum(),
            total_score,
            fabrics,
        }
    }

    pub fn cluster_ids<'a>(&self, candidates: &'a [FabricCandidate]) -> Vec<&'a str> {
        self.fabrics.iter().map(|&f| candidates[f].cluster.id.as_str()).collect()
    }
}

/// Mean score rounded to 1e-9 so float noise cannot decide between equals.
fn quantized(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Ranking order: lower mean score, more redacted instances, less total
/// area, then cluster ids.
pub fn compare_solutions(a: &Solution, b: &Solution, candidates: &[FabricCandidate]) -> Ordering {
    quantized(a.mean_score)
        .cmp(&quantized(b.mean_score))
        .then(b.redacted_instances.cmp(&a.redacted_instances))
        .then(a.total_area.total_cmp(&b.total_area))
        .then_with(|| a.cluster_ids(candidates).cmp(&b.cluster_ids(candidates)))
}

/// Sorts solutions best first.
pub fn rank(solutions: &mut [Solution], candidates: &[FabricCandidate]) {
    solutions.sort_by(|a, b| compare_solutions(a, b, candidates));
}

pub fn rank_and_select<'s>(
    solutions: &'s [Solution],
    candidates: &[FabricCandidate],
) -> Result<&'s Solution, SelectionError> {
    solutions
        .iter()
        .min_by(|a, b| compare_solutions(a, b, candidates))
        .ok_or(SelectionError::Empty)
}

pub fn solutions_csv(ranked: &[Solution], candidates: &[FabricCandidate]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rank", "clusters", "n", "k", "W", "clb_util", "io_util", "mean_T", "total_T", "area", "bitstream_bits",
    ])
    .unwrap();
    for (i, s) in ranked.iter().enumerate() {
        let each = |f: &dyn Fn(&FabricCandidate) -> String| {
            s.fabrics.iter().map(|&x| f(&candidates[x])).collect::<Vec<_>>().join(";")
        };
        let bits: u64 = s.fabrics.iter().map(|&x| candidates[x].result.bitstream_bits).sum();
        w.write_record([
            (i + 1).to_string(),
            each(&|c| c.cluster.id.clone()),
            each(&|c| c.params.n.to_string()),
            each(&|c| c.params.k.to_string()),
            each(&|c| c.result.grid_side.to_string()),
            each(&|c| format!("{:.6}", c.result.clb_util)),
            each(&|c| format!("{:.6}", c.result.io_util)),
            format!("{:.9}", s.mean_score),
            format!("{:.9}", s.total_score),
            format!("{:.3}", s.total_area),
            bits.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
