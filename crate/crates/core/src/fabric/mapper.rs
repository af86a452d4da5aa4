// SPDX-License-Identifier: Apache-2.0
//! K-LUT technology mapping with priority cuts.
//!
//! Buffers are collapsed first. Each logic node then keeps at most
//! `cut_limit` cuts ranked by area flow; the initial cover uses the best
//! cut per node and one exact-area pass (reference counting) follows. Cuts
//! whose function is the identity on a single leaf become plain aliases.

use smallvec::SmallVec;

use super::FabricError;
use crate::ir::{Cell, CellOp, FlatNetlist, GateKind, Sig};
use crate::truth::{TruthTable, MAX_VARS};

pub const DEFAULT_CUT_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutNode {
    pub inputs: Vec<Sig>,
    /// Function over `k` variables; positions past `inputs.len()` are
    /// don't-cares.
    pub table: TruthTable,
    pub output: Sig,
    /// The LUT drives a flip-flop that shares its BLE.
    pub is_sequential: bool,
}

/// A mapped network: LUT cells, flip-flops and alias buffers, with the same
/// ports as the source netlist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutMapping {
    pub k: u32,
    /// Cut size that produced this cover (at most `k`).
    pub mapped_k: u32,
    pub net: FlatNetlist,
}

impl LutMapping {
    pub fn lut_count(&self) -> u32 {
        self.net.cells.iter().filter(|c| matches!(c.op, CellOp::Lut(_))).count() as u32
    }

    pub fn ff_count(&self) -> u32 {
        self.net.cells.iter().filter(|c| c.op.is_sequential()).count() as u32
    }

    fn lut_inputs(&self) -> usize {
        self.net.cells.iter().filter(|c| matches!(c.op, CellOp::Lut(_))).map(|c| c.inputs.len()).sum()
    }

    /// LUTs with tables padded to `k` inputs.
    pub fn lut_nodes(&self) -> Vec<LutNode> {
        let dff_inputs: std::collections::HashSet<Sig> =
            self.net.cells.iter().filter(|c| c.op.is_sequential()).map(|c| c.inputs[0]).collect();
        self.net
            .cells
            .iter()
            .filter_map(|c| match &c.op {
                CellOp::Lut(t) => {
                    let mapping: Vec<usize> = (0..t.vars()).collect();
                    Some(LutNode {
                        inputs: c.inputs.to_vec(),
                        table: t.expand(self.k as usize, &mapping),
                        output: c.output,
                        is_sequential: dff_inputs.contains(&c.output),
                    })
                }
                _ => None,
            })
            .collect()
    }
}

/// Maps `net` onto LUTs of at most `k` inputs. The result is the smallest
/// cover found over every cut size from 2 to `k`, so the LUT count never
/// increases with `k`.
pub fn map_to_luts(net: &FlatNetlist, k: u32, cut_limit: usize) -> Result<LutMapping, FabricError> {
    let mut best: Option<LutMapping> = None;
    for j in (2..=k).rev() {
        let m = map_exact(net, j, cut_limit)?;
        best = Some(match best {
            Some(b) if !better(&m, &b) => b,
            _ => m,
        });
    }
    let mut best = best.ok_or_else(|| FabricError::Params(format!("k must be at least 2, got {k}")))?;
    best.k = k;
    Ok(best)
}

/// Strictly fewer LUTs, or as many with fewer LUT inputs.
pub(crate) fn better(a: &LutMapping, b: &LutMapping) -> bool {
    (a.lut_count(), a.lut_inputs()) < (b.lut_count(), b.lut_inputs())
}

#[derive(Debug, Clone)]
enum Node {
    Source,
    Const(bool),
    Logic { fanins: SmallVec<[u32; 3]>, func: TruthTable },
}

#[derive(Debug, Clone)]
struct Cut {
    leaves: SmallVec<[u32; 8]>,
    tt: TruthTable,
    flow: f64,
}

impl Cut {
    fn is_alias(&self) -> bool {
        self.leaves.len() == 1 && self.tt == TruthTable::var(1, 0)
    }

    fn cost(&self) -> u32 {
        if self.is_alias() {
            0
        } else {
            1
        }
    }
}

/// Maps with cuts of exactly at most `k` leaves, without the monotone
/// fallback.
pub(crate) fn map_exact(src: &FlatNetlist, k: u32, cut_limit: usize) -> Result<LutMapping, FabricError> {
    let k = k as usize;
    let cut_limit = cut_limit.max(1);
    let mut out = FlatNetlist {
        names: src.names.clone(),
        inputs: src.inputs.clone(),
        outputs: src.outputs.clone(),
        cells: Vec::new(),
        instances: src.instances.first().cloned().into_iter().collect(),
        opaque: src.opaque.clone(),
    };
    let order = src.comb_order().map_err(|s| FabricError::CombinationalCycle(src.names[s.idx()].clone()))?;

    // graph over signal indices; decomposition may append signals
    let mut nodes: Vec<Node> = vec![Node::Source; src.num_signals()];
    let mut rep: Vec<u32> = (0..src.num_signals() as u32).collect();
    let mut topo: Vec<u32> = Vec::new();
    for &ci in &order {
        let cell = &src.cells[ci];
        let o = cell.output.0;
        let ins: Vec<u32> = cell.inputs.iter().map(|s| rep[s.idx()]).collect();
        let func = match &cell.op {
            CellOp::Gate(GateKind::Buf) => {
                rep[o as usize] = ins[0];
                continue;
            }
            CellOp::Gate(GateKind::Const0) => {
                nodes[o as usize] = Node::Const(false);
                topo.push(o);
                continue;
            }
            CellOp::Gate(GateKind::Const1) => {
                nodes[o as usize] = Node::Const(true);
                topo.push(o);
                continue;
            }
            CellOp::Gate(kind) => {
                let kind = *kind;
                TruthTable::from_fn(ins.len(), |m| {
                    let lanes: Vec<u64> = (0..ins.len()).map(|j| if m >> j & 1 == 1 { !0 } else { 0 }).collect();
                    kind.eval(&lanes) & 1 == 1
                })
            }
            CellOp::Lut(t) => *t,
        };
        // collapse repeated fanins
        let mut fanins: SmallVec<[u32; 3]> = SmallVec::new();
        let mut pos = Vec::with_capacity(ins.len());
        for s in &ins {
            match fanins.iter().position(|f| f == s) {
                Some(p) => pos.push(p),
                None => {
                    pos.push(fanins.len());
                    fanins.push(*s);
                }
            }
        }
        let func = TruthTable::from_fn(fanins.len(), |m| {
            let idx = pos.iter().enumerate().fold(0, |acc, (j, &p)| acc | ((m >> p) & 1) << j);
            func.get(idx)
        });
        if fanins.len() > k {
            if fanins.len() != 3 || k != 2 {
                return Err(FabricError::Unmappable(format!(
                    "`{}` has {} inputs, above k = {k}",
                    src.names[o as usize],
                    fanins.len()
                )));
            }
            decompose3(&mut out, &mut nodes, &mut topo, o, &fanins, &func);
            continue;
        }
        nodes[o as usize] = Node::Logic { fanins, func };
        topo.push(o);
    }
    let n = nodes.len();

    // roots: primary outputs and flip-flop data inputs
    let flops: Vec<&Cell> = src.cells.iter().filter(|c| c.op.is_sequential()).collect();
    let mut roots: Vec<u32> = src.output_sigs().map(|s| rep[s.idx()]).collect();
    roots.extend(flops.iter().map(|c| rep[c.inputs[0].idx()]));

    let mut fanout = vec![0u32; n];
    for v in &topo {
        if let Node::Logic { fanins, .. } = &nodes[*v as usize] {
            for f in fanins {
                fanout[*f as usize] += 1;
            }
        }
    }
    for r in &roots {
        fanout[*r as usize] += 1;
    }

    // cut enumeration in topological order
    let mut cuts: Vec<Vec<Cut>> = vec![Vec::new(); n];
    let mut flow = vec![0f64; n];
    // cut over the whole source support (up to MAX_VARS before
    // redundant leaves are dropped), kept whenever it fits
    let mut support: Vec<Option<Cut>> = vec![None; n];
    for &v in &topo {
        let vi = v as usize;
        match &nodes[vi] {
            Node::Const(b) => {
                cuts[vi] = vec![Cut { leaves: SmallVec::new(), tt: TruthTable::constant(0, *b), flow: 1.0 }];
                flow[vi] = 1.0 / fanout[vi].max(1) as f64;
            }
            Node::Logic { fanins, func } => {
                let options: Vec<Vec<Cut>> = fanins.iter().map(|&f| fanin_cuts(&nodes, &cuts, f)).collect();
                let mut found: Vec<Cut> = Vec::new();
                let mut choice = vec![0usize; options.len()];
                'outer: loop {
                    let mut leaves: SmallVec<[u32; 8]> = SmallVec::new();
                    let mut fits = true;
                    for (i, &c) in choice.iter().enumerate() {
                        for &l in &options[i][c].leaves {
                            if let Err(p) = leaves.binary_search(&l) {
                                if leaves.len() == k {
                                    fits = false;
                                    break;
                                }
                                leaves.insert(p, l);
                            }
                        }
                        if !fits {
                            break;
                        }
                    }
                    if fits && !found.iter().any(|c| c.leaves == leaves) {
                        let parts: Vec<&Cut> = choice.iter().enumerate().map(|(i, &c)| &options[i][c]).collect();
                        let tt = compose(func, &parts, &leaves);
                        let (leaves, tt) = reduce_support(leaves, tt);
                        if !found.iter().any(|c| c.leaves == leaves) {
                            let f = cut_flow(&leaves, &tt, &flow);
                            found.push(Cut { leaves, tt, flow: f });
                        }
                    }
                    // odometer over fanin cut choices
                    for i in 0..choice.len() {
                        choice[i] += 1;
                        if choice[i] < options[i].len() {
                            continue 'outer;
                        }
                        choice[i] = 0;
                    }
                    break;
                }
                let whole = support_cut(&nodes, &cuts, &support, fanins, func);
                if let Some(w) = whole.as_ref().filter(|w| w.leaves.len() <= k) {
                    if !found.iter().any(|c| c.leaves == w.leaves) {
                        let f = cut_flow(&w.leaves, &w.tt, &flow);
                        found.push(Cut { flow: f, ..w.clone() });
                    }
                }
                found.sort_by(|a, b| {
                    a.flow
                        .total_cmp(&b.flow)
                        .then(a.leaves.len().cmp(&b.leaves.len()))
                        .then(a.leaves.cmp(&b.leaves))
                });
                let mut kept: Vec<Cut> = Vec::new();
                for c in found {
                    if kept.len() == cut_limit {
                        break;
                    }
                    if kept.iter().any(|d| is_subset(&d.leaves, &c.leaves)) {
                        continue;
                    }
                    kept.push(c);
                }
                if let Some(w) = whole {
                    if w.leaves.len() <= k && !kept.iter().any(|d| is_subset(&d.leaves, &w.leaves)) {
                        let f = cut_flow(&w.leaves, &w.tt, &flow);
                        kept.push(Cut { flow: f, ..w.clone() });
                    }
                    support[vi] = Some(w);
                }
                flow[vi] = kept[0].flow / fanout[vi].max(1) as f64;
                cuts[vi] = kept;
            }
            Node::Source => {}
        }
    }

    // initial cover from best cuts, then exact-area recovery
    let mut best: Vec<usize> = vec![0; n];
    let mut refs = vec![0u32; n];
    for &r in &roots {
        if refs[r as usize] == 0 && !cuts[r as usize].is_empty() {
            reference(&cuts, &best, &mut refs, r);
        }
        refs[r as usize] += 1;
    }
    for &v in &topo {
        let vi = v as usize;
        if refs[vi] == 0 || cuts[vi].len() < 2 {
            continue;
        }
        dereference(&cuts, &best, &mut refs, v);
        let mut pick = (u32::MAX, usize::MAX, 0usize);
        for c in 0..cuts[vi].len() {
            best[vi] = c;
            let area = reference(&cuts, &best, &mut refs, v);
            dereference(&cuts, &best, &mut refs, v);
            let key = (area, cuts[vi][c].leaves.len(), c);
            if key < pick {
                pick = key;
            }
        }
        best[vi] = pick.2;
        reference(&cuts, &best, &mut refs, v);
    }

    for &v in &topo {
        let vi = v as usize;
        if refs[vi] == 0 {
            continue;
        }
        let cut = &cuts[vi][best[vi]];
        let (op, inputs): (CellOp, SmallVec<[Sig; 4]>) = if cut.is_alias() {
            (CellOp::Gate(GateKind::Buf), [Sig(cut.leaves[0])].into_iter().collect())
        } else {
            (CellOp::Lut(cut.tt), cut.leaves.iter().map(|&l| Sig(l)).collect())
        };
        out.cells.push(Cell { op, inputs, output: Sig(v), owner: 0 });
    }
    for c in &flops {
        out.cells.push(Cell {
            op: CellOp::Gate(GateKind::Dff),
            inputs: [Sig(rep[c.inputs[0].idx()])].into_iter().collect(),
            output: c.output,
            owner: 0,
        });
    }
    for s in src.output_sigs() {
        let r = rep[s.idx()];
        if r != s.0 {
            out.cells.push(Cell {
                op: CellOp::Gate(GateKind::Buf),
                inputs: [Sig(r)].into_iter().collect(),
                output: s,
                owner: 0,
            });
        }
    }
    Ok(LutMapping { k: k as u32, mapped_k: k as u32, net: out })
}

/// Splits a 3-input node for 2-input mapping: `s ? f1(a, b) : f0(a, b)`.
fn decompose3(
    out: &mut FlatNetlist,
    nodes: &mut Vec<Node>,
    topo: &mut Vec<u32>,
    o: u32,
    fanins: &[u32],
    func: &TruthTable,
) {
    let base = out.names[o as usize].clone();
    let fresh = |out: &mut FlatNetlist, nodes: &mut Vec<Node>, tag: &str| {
        let s = out.new_sig(format!("{base}~{tag}"));
        nodes.push(Node::Source);
        s.0
    };
    let (s, a, b) = (fanins[0], fanins[1], fanins[2]);
    let half = |val: usize| TruthTable::from_fn(2, |m| func.get(val | (m << 1)));
    let and2 = TruthTable::from_fn(2, |m| m == 3);
    let t1 = fresh(out, nodes, "f1");
    let t0 = fresh(out, nodes, "f0");
    let ns = fresh(out, nodes, "ns");
    let u1 = fresh(out, nodes, "u1");
    let u0 = fresh(out, nodes, "u0");
    let parts = [
        (t1, SmallVec::from_slice(&[a, b]), half(1)),
        (t0, SmallVec::from_slice(&[a, b]), half(0)),
        (ns, SmallVec::from_slice(&[s]), TruthTable::var(1, 0).not()),
        (u1, SmallVec::from_slice(&[s, t1]), and2),
        (u0, SmallVec::from_slice(&[ns, t0]), and2),
        (o, SmallVec::from_slice(&[u1, u0]), TruthTable::from_fn(2, |m| m != 0)),
    ];
    for (sig, fanins, func) in parts {
        nodes[sig as usize] = Node::Logic { fanins, func };
        topo.push(sig);
    }
}

/// Cuts a fanout may use for fanin `f`: its priority cuts plus `{f}`.
fn fanin_cuts(nodes: &[Node], cuts: &[Vec<Cut>], f: u32) -> Vec<Cut> {
    let trivial = Cut { leaves: SmallVec::from_slice(&[f]), tt: TruthTable::var(1, 0), flow: 0.0 };
    match nodes[f as usize] {
        Node::Source => vec![trivial],
        Node::Const(_) => cuts[f as usize].clone(),
        Node::Logic { .. } => {
            let mut v = cuts[f as usize].clone();
            v.push(trivial);
            v
        }
    }
}

fn support_cut(
    nodes: &[Node],
    cuts: &[Vec<Cut>],
    support: &[Option<Cut>],
    fanins: &[u32],
    func: &TruthTable,
) -> Option<Cut> {
    let parts: Vec<Cut> = fanins
        .iter()
        .map(|&f| match &nodes[f as usize] {
            Node::Source => Some(Cut { leaves: SmallVec::from_slice(&[f]), tt: TruthTable::var(1, 0), flow: 0.0 }),
            Node::Const(_) => Some(cuts[f as usize][0].clone()),
            Node::Logic { .. } => support[f as usize].clone(),
        })
        .collect::<Option<_>>()?;
    let mut leaves: SmallVec<[u32; 8]> = SmallVec::new();
    for c in &parts {
        for &l in &c.leaves {
            if let Err(p) = leaves.binary_search(&l) {
                if leaves.len() == MAX_VARS {
                    return None;
                }
                leaves.insert(p, l);
            }
        }
    }
    let refs: Vec<&Cut> = parts.iter().collect();
    let tt = compose(func, &refs, &leaves);
    let (leaves, tt) = reduce_support(leaves, tt);
    Some(Cut { leaves, tt, flow: 0.0 })
}

fn compose(func: &TruthTable, parts: &[&Cut], leaves: &[u32]) -> TruthTable {
    let n = leaves.len();
    let ins: Vec<TruthTable> = parts
        .iter()
        .map(|c| {
            let mapping: Vec<usize> = c.leaves.iter().map(|l| leaves.binary_search(l).unwrap()).collect();
            c.tt.expand(n, &mapping)
        })
        .collect();
    let mut acc = TruthTable::constant(n, false);
    for m in 0..func.len() {
        if !func.get(m) {
            continue;
        }
        let mut term = TruthTable::constant(n, true);
        for (j, t) in ins.iter().enumerate() {
            let lit = if m >> j & 1 == 1 { *t } else { t.not() };
            term = term.zip(&lit, |a, b| a & b);
        }
        acc = acc.zip(&term, |a, b| a | b);
    }
    acc
}

fn reduce_support(leaves: SmallVec<[u32; 8]>, tt: TruthTable) -> (SmallVec<[u32; 8]>, TruthTable) {
    let keep: Vec<usize> = (0..leaves.len()).filter(|&j| tt.depends_on(j)).collect();
    if keep.len() == leaves.len() {
        return (leaves, tt);
    }
    (keep.iter().map(|&j| leaves[j]).collect(), tt.restrict(&keep))
}

fn cut_flow(leaves: &[u32], tt: &TruthTable, flow: &[f64]) -> f64 {
    let own = if leaves.len() == 1 && *tt == TruthTable::var(1, 0) { 0.0 } else { 1.0 };
    own + leaves.iter().map(|&l| flow[l as usize]).sum::<f64>()
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Adds the cone of `v` under the current cut choice; returns the LUTs added.
fn reference(cuts: &[Vec<Cut>], best: &[usize], refs: &mut [u32], v: u32) -> u32 {
    let cut = &cuts[v as usize][best[v as usize]];
    let mut area = cut.cost();
    for &l in &cut.leaves {
        let li = l as usize;
        if refs[li] == 0 && !cuts[li].is_empty() {
            area += reference(cuts, best, refs, l);
        }
        refs[li] += 1;
    }
    area
}

fn dereference(cuts: &[Vec<Cut>], best: &[usize], refs: &mut [u32], v: u32) -> u32 {
    let cut = &cuts[v as usize][best[v as usize]];
    let mut area = cut.cost();
    for &l in &cut.leaves {
        let li = l as usize;
        refs[li] -= 1;
        if refs[li] == 0 && !cuts[li].is_empty() {
            area += dereference(cuts, best, refs, l);
        }
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{flatten, parse_verilog, sim::simulate_flat};

    fn map_src(src: &str, k: u32) -> (FlatNetlist, LutMapping) {
        let d = parse_verilog(src).unwrap();
        let net = flatten(&d, d.top()).unwrap();
        let m = map_to_luts(&net, k, DEFAULT_CUT_LIMIT).unwrap();
        (net, m)
    }

    fn exhaustive_equal(a: &FlatNetlist, b: &FlatNetlist) {
        let n = a.input_bits();
        assert!(n <= 12);
        let stim: Vec<Vec<bool>> = (0..1usize << n).map(|m| (0..n).map(|j| m >> j & 1 == 1).collect()).collect();
        assert_eq!(simulate_flat(a, &stim).unwrap(), simulate_flat(b, &stim).unwrap());
    }

    #[test]
    fn xor_is_one_padded_lut() {
        let (net, m) = map_src("module x(input a, b, output y); assign y = a ^ b; endmodule", 4);
        assert_eq!(m.lut_count(), 1);
        let lut = &m.lut_nodes()[0];
        assert_eq!(lut.table.vars(), 4);
        assert_eq!(lut.table.to_hex(), "6666");
        exhaustive_equal(&net, &m.net);
    }

    #[test]
    fn feed_through_needs_no_lut() {
        let (net, m) = map_src("module f(input a, output y); wire t = a; assign y = t; endmodule", 4);
        assert_eq!(m.lut_count(), 0);
        exhaustive_equal(&net, &m.net);
    }

    #[test]
    fn full_adder_in_two_three_input_luts() {
        let src = "module fa(input a, b, c, output s, co);
            wire x = a ^ b; assign s = x ^ c; assign co = (a & b) | (x & c); endmodule";
        let (net, m) = map_src(src, 3);
        assert_eq!(m.lut_count(), 2);
        exhaustive_equal(&net, &m.net);
    }

    #[test]
    fn two_input_mapping_splits_muxes() {
        let (net, m) = map_src("module m(input s, a, b, output y); assign y = s ? a : b; endmodule", 2);
        assert!(m.lut_count() >= 3);
        exhaustive_equal(&net, &m.net);
    }

    #[test]
    fn registers_survive_mapping() {
        let src = "module r(input clk, input [1:0] d, output reg [1:0] q); always @(posedge clk) q <= d + q; endmodule";
        let (net, m) = map_src(src, 4);
        assert_eq!(m.ff_count(), 2);
        let stim: Vec<Vec<bool>> = (0..20).map(|i| vec![false, i % 3 == 0, i % 2 == 0]).collect();
        assert_eq!(simulate_flat(&net, &stim).unwrap(), simulate_flat(&m.net, &stim).unwrap());
    }

    #[test]
    fn constant_output_is_a_zero_input_lut() {
        let (net, m) = map_src("module c(input a, output y, z); assign y = 1'b1; assign z = a & ~a; endmodule", 4);
        exhaustive_equal(&net, &m.net);
        assert!(m.lut_count() <= 2);
    }
}
