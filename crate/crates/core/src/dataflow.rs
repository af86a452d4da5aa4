// SPDX-License-Identifier: Apache-2.0
//! Candidate module filtering by output-cone relevance and I/O bound.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{flatten, Design, FlatNetlist, InstancePath, IrError, Sig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataflowError {
    #[error("selected output `{0}` is not a top-level output")]
    UnknownOutput(String),
    #[error("instance `{0}` not found")]
    UnknownInstance(String),
    #[error("invalid filter parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterParams {
    pub max_io: u32,
    pub selected_outputs: Vec<String>,
    pub score_threshold: u32,
    /// Keep only the best `top_k` survivors.
    pub top_k: Option<usize>,
}

impl FilterParams {
    pub fn new(max_io: u32, selected_outputs: Vec<String>) -> Self {
        Self { max_io, selected_outputs, score_threshold: 1, top_k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModuleScore {
    pub instance_path: InstancePath,
    pub module: String,
    pub score: u32,
    pub io_pins: u32,
}

/// One line of the candidate report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assessment {
    pub candidate: ModuleScore,
    pub kept: bool,
    pub reason: &'static str,
}

/// Flattened view of a design for cone queries.
pub struct ConeGraph<'a> {
    design: &'a Design,
    net: FlatNetlist,
    fanout: Vec<Vec<Sig>>,
    output_of: HashMap<Sig, Vec<usize>>,
    instance_index: HashMap<InstancePath, usize>,
}

impl<'a> ConeGraph<'a> {
    pub fn new(design: &'a Design) -> Result<Self, DataflowError> {
        let net = flatten(design, design.top())?;
        let mut fanout = vec![Vec::new(); net.num_signals()];
        for c in &net.cells {
            for s in &c.inputs {
                fanout[s.idx()].push(c.output);
            }
        }
        let mut output_of: HashMap<Sig, Vec<usize>> = HashMap::new();
        for (i, (_, sigs)) in net.outputs.iter().enumerate() {
            for s in sigs {
                output_of.entry(*s).or_default().push(i);
            }
        }
        let instance_index = net.instances.iter().enumerate().map(|(i, p)| (p.path.clone(), i)).collect();
        Ok(Self { design, net, fanout, output_of, instance_index })
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.net.outputs.iter().map(|(n, _)| n.as_str())
    }

    /// Top-level outputs reachable from any output bit of the instance.
    pub fn affected_outputs(&self, path: &InstancePath) -> Result<BTreeSet<String>, DataflowError> {
        let &idx = self
            .instance_index
            .get(path)
            .ok_or_else(|| DataflowError::UnknownInstance(path.to_string()))?;
        let mut seen = vec![false; self.net.num_signals()];
        let mut queue: VecDeque<Sig> = VecDeque::new();
        for s in self.net.instances[idx].outputs.iter().flat_map(|(_, s)| s) {
            if !seen[s.idx()] {
                seen[s.idx()] = true;
                queue.push_back(*s);
            }
        }
        let mut hit = BTreeSet::new();
        while let Some(s) = queue.pop_front() {
            if let Some(outs) = self.output_of.get(&s) {
                hit.extend(outs.iter().map(|&o| self.net.outputs[o].0.clone()));
            }
            for &t in &self.fanout[s.idx()] {
                if !seen[t.idx()] {
                    seen[t.idx()] = true;
                    queue.push_back(t);
                }
            }
        }
        Ok(hit)
    }

    /// Scores every non-root instance and marks which survive the filter.
    pub fn assess(&self, params: &FilterParams) -> Result<Vec<Assessment>, DataflowError> {
        if params.max_io < 1 {
            return Err(DataflowError::Params("max_io must be at least 1".into()));
        }
        if params.selected_outputs.is_empty() {
            return Err(DataflowError::Params("selected_outputs is empty".into()));
        }
        let names: HashSet<&str> = self.output_names().collect();
        if let Some(bad) = params.selected_outputs.iter().find(|o| !names.contains(o.as_str())) {
            return Err(DataflowError::UnknownOutput(bad.clone()));
        }
        let selected: HashSet<&str> = params.selected_outputs.iter().map(String::as_str).collect();
        let tree = self.design.tree();
        let opaque_subtree = blackbox_subtrees(self.design);
        let paths: Vec<&InstancePath> = tree.paths().filter(|p| *p != tree.root()).collect();
        let mut rows: Vec<Assessment> = paths
            .par_iter()
            .map(|&path| {
                let module = self.design.module_at(path).expect("tree paths resolve");
                let score = self
                    .affected_outputs(path)?
                    .iter()
                    .filter(|o| selected.contains(o.as_str()))
                    .count() as u32;
                let candidate = ModuleScore {
                    instance_path: path.clone(),
                    module: module.name.clone(),
                    score,
                    io_pins: module.io_pins(),
                };
                let (kept, reason) = if opaque_subtree.contains(path) {
                    (false, "black box")
                } else if score < params.score_threshold {
                    (false, "score")
                } else if candidate.io_pins > params.max_io {
                    (false, "io_pins")
                } else {
                    (true, "")
                };
                Ok(Assessment { candidate, kept, reason })
            })
            .collect::<Result<_, DataflowError>>()?;
        rows.sort_by(|a, b| {
            b.kept
                .cmp(&a.kept)
                .then(b.candidate.score.cmp(&a.candidate.score))
                .then(a.candidate.io_pins.cmp(&b.candidate.io_pins))
                .then(a.candidate.instance_path.cmp(&b.candidate.instance_path))
        });
        if let Some(k) = params.top_k {
            for row in rows.iter_mut().filter(|r| r.kept).skip(k) {
                row.kept = false;
                row.reason = "top_k";
            }
        }
        Ok(rows)
    }
}

/// Instances that are black boxes or contain one; they cannot be mapped.
fn blackbox_subtrees(design: &Design) -> HashSet<InstancePath> {
    let tree = design.tree();
    let mut out = HashSet::new();
    for node in tree.nodes() {
        if design.module(&node.module).is_some_and(|m| m.blackbox) {
            out.insert(node.path.clone());
            out.extend(tree.ancestors(&node.path));
        }
    }
    out
}

pub fn affected_outputs(design: &Design, path: &InstancePath) -> Result<BTreeSet<String>, DataflowError> {
    ConeGraph::new(design)?.affected_outputs(path)
}

/// The candidate set: kept instances by descending score, then ascending
/// I/O pins, then path. The top instance is never a candidate.
pub fn filter_modules(design: &Design, params: &FilterParams) -> Result<Vec<ModuleScore>, DataflowError> {
    Ok(ConeGraph::new(design)?
        .assess(params)?
        .into_iter()
        .filter(|a| a.kept)
        .map(|a| a.candidate)
        .collect())
}

pub fn candidates_csv(rows: &[Assessment]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["instance_path", "module", "score", "io_pins", "status"]).unwrap();
    for r in rows {
        let status = if r.kept { "kept".to_string() } else { format!("dropped:{}", r.reason) };
        w.write_record([
            r.candidate.instance_path.as_str(),
            &r.candidate.module,
            &r.candidate.score.to_string(),
            &r.candidate.io_pins.to_string(),
            &status,
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_verilog;

    const PIPE: &str = "
        module stage(input clk, input [1:0] a, output reg [1:0] q); always @(posedge clk) q <= ~a; endmodule
        module top(input clk, input [1:0] d, output [1:0] out, output [1:0] side);
          wire [1:0] m, dead;
          stage m1(.clk(clk), .a(d), .q(m));
          stage m2(.clk(clk), .a(m), .q(out));
          stage m3(.clk(clk), .a(d), .q(dead));
          assign side = d;
        endmodule";

    fn p(s: &str) -> InstancePath {
        InstancePath::new(s)
    }

    #[test]
    fn pipeline_reaches_through_registers() {
        let d = parse_verilog(PIPE).unwrap();
        let g = ConeGraph::new(&d).unwrap();
        let want: BTreeSet<String> = ["out".to_string()].into();
        assert_eq!(g.affected_outputs(&p("top.m1")).unwrap(), want);
        assert_eq!(g.affected_outputs(&p("top.m2")).unwrap(), want);
        assert!(g.affected_outputs(&p("top.m3")).unwrap().is_empty());
        assert!(g.affected_outputs(&p("top.nope")).is_err());
    }

    #[test]
    fn filter_orders_and_reports() {
        let d = parse_verilog(PIPE).unwrap();
        let params = FilterParams::new(5, vec!["out".into()]);
        let kept = filter_modules(&d, &params).unwrap();
        let paths: Vec<&str> = kept.iter().map(|m| m.instance_path.as_str()).collect();
        assert_eq!(paths, ["top.m1", "top.m2"]);
        let rows = ConeGraph::new(&d).unwrap().assess(&params).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(candidates_csv(&rows).contains("top.m3,stage,0,5,dropped:score"));
        let tight = FilterParams::new(4, vec!["out".into()]);
        assert!(filter_modules(&d, &tight).unwrap().is_empty());
        let bad = FilterParams::new(4, vec!["nope".into()]);
        assert_eq!(filter_modules(&d, &bad), Err(DataflowError::UnknownOutput("nope".into())));
    }

    #[test]
    fn two_output_module_ranks_first() {
        let src = "
            module one(input a, output y); assign y = ~a; endmodule
            module two(input a, output y, output z); assign y = a; assign z = ~a; endmodule
            module top(input a, output o1, output o2, output o3);
              wire t;
              one u1(.a(a), .y(o3));
              two u2(.a(a), .y(o1), .z(o2));
            endmodule";
        let d = parse_verilog(src).unwrap();
        let params = FilterParams::new(64, vec!["o1".into(), "o2".into(), "o3".into()]);
        let kept = filter_modules(&d, &params).unwrap();
        assert_eq!(kept[0].instance_path, p("top.u2"));
        assert_eq!((kept[0].score, kept[1].score), (2, 1));
    }
}
