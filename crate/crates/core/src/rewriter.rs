// SPDX-License-Identifier: Apache-2.0
//! Replaces redacted instances with eFPGA shells and emits the result.
//!
//! A shell goes in the lowest common ancestor of its members' parents (in a
//! tree every ancestor dominates, so this is the dominator). Member
//! signals reach it through ports punched into every module on the way.
//! Modules on those paths that are instantiated more than once are cloned
//! first, so other instances are left alone. Each shell also gets
//! `prog_clk`, `scan_in`, `op_clk` and `scan_out`, wired out to new top
//! ports named `efpga<i>_<role>`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::clustering::WrapperModule;
use crate::fabric::FabricResult;
use crate::ir::{
    emit_verilog, flatten_with, net_bits, BitRef, Design, Direction, FlatNetlist, Gate, GateKind, Instance,
    InstancePath, IrError, ModuleDef,
};

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("instance `{0}` not found")]
    MissingMember(String),
    #[error("the top instance cannot be redacted")]
    RootMember,
    #[error("instance `{0}` is redacted by more than one eFPGA")]
    Overlap(String),
    #[error("width mismatch on `{0}`")]
    Width(String),
    #[error("could not find a free name for `{0}`")]
    Names(String),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("writing `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// One selected eFPGA: its wrapper and characterization.
#[derive(Debug, Clone)]
pub struct RedactionUnit {
    pub wrapper: WrapperModule,
    pub result: FabricResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reroute {
    pub member: InstancePath,
    pub port: String,
    pub bit: u32,
    pub efpga_port: String,
    pub efpga_bit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EfpgaPlan {
    pub index: usize,
    pub cluster_id: String,
    pub members: Vec<InstancePath>,
    pub insertion: InstancePath,
    pub reroutes: Vec<Reroute>,
    /// Bits of new ports per module instance path.
    pub added_port_bits: BTreeMap<InstancePath, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RedactionPlan {
    pub efpgas: Vec<EfpgaPlan>,
}

pub const CONFIG_ROLES: [(&str, Direction); 4] = [
    ("prog_clk", Direction::Input),
    ("scan_in", Direction::Input),
    ("op_clk", Direction::Input),
    ("scan_out", Direction::Output),
];

pub fn plan_redaction(design: &Design, units: &[RedactionUnit]) -> Result<RedactionPlan, RewriteError> {
    let tree = design.tree();
    let mut seen = HashSet::new();
    let mut efpgas = Vec::new();
    for (index, unit) in units.iter().enumerate() {
        let members = unit.wrapper.cluster.members.clone();
        let mut parents = Vec::new();
        for m in &members {
            if !tree.contains(m) {
                return Err(RewriteError::MissingMember(m.to_string()));
            }
            if !seen.insert(m.clone()) || seen.iter().any(|s: &InstancePath| s.is_ancestor_of(m) || m.is_ancestor_of(s)) {
                return Err(RewriteError::Overlap(m.to_string()));
            }
            parents.push(m.parent().ok_or(RewriteError::RootMember)?);
        }
        let insertion = tree.lca(&parents).ok_or_else(|| RewriteError::MissingMember(unit.wrapper.cluster.id.clone()))?;
        let mut reroutes = Vec::new();
        let mut added: BTreeMap<InstancePath, u32> = BTreeMap::new();
        for b in &unit.wrapper.port_map {
            for bit in 0..b.width {
                reroutes.push(Reroute {
                    member: b.member.clone(),
                    port: b.port.clone(),
                    bit,
                    efpga_port: b.wrapper_port.clone(),
                    efpga_bit: bit,
                });
            }
            let mut p = b.member.parent().unwrap();
            while p != insertion {
                *added.entry(p.clone()).or_default() += b.width;
                p = p.parent().unwrap();
            }
        }
        let mut p = insertion.clone();
        while let Some(up) = p.parent() {
            *added.entry(p.clone()).or_default() += CONFIG_ROLES.len() as u32;
            p = up;
        }
        *added.entry(p).or_default() += CONFIG_ROLES.len() as u32;
        efpgas.push(EfpgaPlan {
            index,
            cluster_id: unit.wrapper.cluster.id.clone(),
            members,
            insertion,
            reroutes,
            added_port_bits: added,
        });
    }
    Ok(RedactionPlan { efpgas })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShellInfo {
    pub index: usize,
    pub module: String,
    pub instance: InstancePath,
    /// Config role → top-level port name.
    pub config_ports: BTreeMap<String, String>,
    /// Config role → port name on the shell.
    pub shell_config_ports: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RedactedDesign {
    pub design: Design,
    pub shells: Vec<ShellInfo>,
}

impl RedactedDesign {
    /// Whole design with each shell bound to its mapped LUT network.
    pub fn configured(&self, units: &[RedactionUnit]) -> Result<FlatNetlist, IrError> {
        let bindings: HashMap<String, FlatNetlist> = self
            .shells
            .iter()
            .map(|s| (s.module.clone(), units[s.index].result.mapping.net.clone()))
            .collect();
        flatten_with(&self.design, self.design.top(), &bindings)
    }
}

struct Editor {
    top: String,
    modules: IndexMap<String, ModuleDef>,
    path_module: HashMap<InstancePath, String>,
    counts: HashMap<String, usize>,
}

fn free_name(def: &ModuleDef, base: &str) -> String {
    let taken = |n: &str| def.nets.contains_key(n) || def.instances.iter().any(|i| i.name == n);
    if !taken(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}_{i}")).find(|n| !taken(n)).unwrap()
}

struct Punched {
    from_bits: Vec<BitRef>,
    to_bits: Vec<BitRef>,
    to_name: String,
}

impl Editor {
    fn new(design: &Design) -> Self {
        let mut path_module = HashMap::new();
        let mut counts: HashMap<String, usize> = HashMap::new();
        for node in design.tree().nodes() {
            path_module.insert(node.path.clone(), node.module.clone());
            *counts.entry(node.module.clone()).or_default() += 1;
        }
        Self {
            top: design.top().to_string(),
            modules: design.modules().map(|m| (m.name.clone(), m.clone())).collect(),
            path_module,
            counts,
        }
    }

    fn def_mut(&mut self, path: &InstancePath) -> &mut ModuleDef {
        let name = &self.path_module[path];
        self.modules.get_mut(name).unwrap()
    }

    fn fresh_module(&self, base: &str) -> String {
        if !self.modules.contains_key(base) {
            return base.to_string();
        }
        (1..).map(|i| format!("{base}_{i}")).find(|n| !self.modules.contains_key(n)).unwrap()
    }

    /// Gives every module from the root down to `path` a single instance.
    fn uniquify(&mut self, path: &InstancePath) {
        let segs: Vec<&str> = path.segments().collect();
        for depth in 1..segs.len() {
            let p = InstancePath::new(segs[..=depth].join("."));
            let module = self.path_module[&p].clone();
            if self.counts[&module] <= 1 {
                continue;
            }
            let clone_name = self.fresh_module(&format!("{module}_u"));
            let mut def = self.modules[&module].clone();
            def.name = clone_name.clone();
            self.modules.insert(clone_name.clone(), def);
            *self.counts.get_mut(&module).unwrap() -= 1;
            self.counts.insert(clone_name.clone(), 1);
            self.path_module.insert(p.clone(), clone_name.clone());
            let parent = p.parent().unwrap();
            let leaf = p.leaf().to_string();
            let pdef = self.def_mut(&parent);
            pdef.instances.iter_mut().find(|i| i.name == leaf).unwrap().module = clone_name;
        }
    }

    /// Adds a port to every module from `from` up to, not including, `to`,
    /// wired through the instances in between. At `to` a net is created, or
    /// a port when `port_at_to`. `up` means the signal is driven at `from`.
    fn punch(&mut self, from: &InstancePath, to: &InstancePath, up: bool, base: &str, width: u32, port_at_to: bool) -> Punched {
        let dir = if up { Direction::Output } else { Direction::Input };
        let def = self.def_mut(from);
        let mut child_port = free_name(def, base);
        def.add_port(&child_port, dir, width);
        let from_bits = net_bits(&child_port, width);
        let mut child = from.clone();
        loop {
            let parent = child.parent().expect("`to` is an ancestor of `from`");
            let at_to = &parent == to;
            let pdef = self.def_mut(&parent);
            let name = free_name(pdef, base);
            if at_to && !port_at_to {
                pdef.add_net(&name, width);
            } else {
                pdef.add_port(&name, dir, width);
            }
            let bits = net_bits(&name, width);
            let leaf = child.leaf();
            let inst = pdef.instances.iter_mut().find(|i| i.name == leaf).expect("instance on the path");
            inst.connections.insert(child_port.clone(), bits.clone());
            if at_to {
                return Punched { from_bits, to_bits: bits, to_name: name };
            }
            child_port = name;
            child = parent;
        }
    }
}

pub fn apply_redaction(
    design: &Design,
    plan: &RedactionPlan,
    units: &[RedactionUnit],
) -> Result<RedactedDesign, RewriteError> {
    if plan.efpgas.is_empty() {
        return Ok(RedactedDesign { design: design.clone(), shells: Vec::new() });
    }
    let mut ed = Editor::new(design);
    let root = design.tree().root().clone();
    let mut shells = Vec::new();
    for ep in &plan.efpgas {
        let unit = &units[ep.index];
        let wrapper = unit.wrapper.module();
        for m in &ep.members {
            ed.uniquify(&m.parent().unwrap());
        }
        ed.uniquify(&ep.insertion);

        let shell_name = ed.fresh_module(&format!("efpga{}", ep.index));
        let mut shell = ModuleDef::new(&shell_name);
        shell.blackbox = true;
        for p in &wrapper.ports {
            shell.add_port(&p.name, p.direction, p.width);
        }
        let mut shell_cfg = BTreeMap::new();
        for (role, dir) in CONFIG_ROLES {
            let name = free_name(&shell, role);
            shell.add_port(&name, dir, 1);
            shell_cfg.insert(role.to_string(), name);
        }
        let mut conns: IndexMap<String, Vec<BitRef>> = IndexMap::new();

        for m in &ep.members {
            let p = m.parent().unwrap();
            let pdef = ed.def_mut(&p);
            let pos = pdef
                .instances
                .iter()
                .position(|i| i.name == m.leaf())
                .ok_or_else(|| RewriteError::MissingMember(m.to_string()))?;
            let inst = pdef.instances.remove(pos);
            for b in unit.wrapper.port_map.iter().filter(|b| &b.member == m) {
                let conn = inst.connections.get(&b.port).cloned().ok_or_else(|| RewriteError::Width(b.port.clone()))?;
                if conn.len() != b.width as usize {
                    return Err(RewriteError::Width(format!("{m}.{}", b.port)));
                }
                let bits = if p == ep.insertion {
                    conn
                } else {
                    let up = b.direction == Direction::Input;
                    let base = format!("efpga{}_{}", ep.index, b.wrapper_port);
                    let punched = ed.punch(&p, &ep.insertion, up, &base, b.width, false);
                    let pdef = ed.def_mut(&p);
                    for (c, f) in conn.iter().zip(&punched.from_bits) {
                        let (src, dst) = if up { (c, f) } else { (f, c) };
                        pdef.gates.push(Gate::new(GateKind::Buf, vec![src.clone()], dst.clone()));
                    }
                    punched.to_bits
                };
                conns.insert(b.wrapper_port.clone(), bits);
            }
        }

        let mut top_ports = BTreeMap::new();
        for (role, dir) in CONFIG_ROLES {
            let base = format!("efpga{}_{role}", ep.index);
            let up = dir == Direction::Output;
            let bits = if ep.insertion == root {
                let tdef = ed.def_mut(&root);
                let name = free_name(tdef, &base);
                tdef.add_port(&name, dir, 1);
                top_ports.insert(role.to_string(), name.clone());
                net_bits(&name, 1)
            } else {
                let punched = ed.punch(&ep.insertion, &root, up, &base, 1, true);
                top_ports.insert(role.to_string(), punched.to_name);
                punched.from_bits
            };
            conns.insert(shell_cfg[role].clone(), bits);
        }

        let idef = ed.def_mut(&ep.insertion);
        let inst_name = free_name(idef, &format!("efpga{}", ep.index));
        idef.instances.push(Instance { name: inst_name.clone(), module: shell_name.clone(), connections: conns });
        ed.modules.insert(shell_name.clone(), shell);
        shells.push(ShellInfo {
            index: ep.index,
            module: shell_name,
            instance: ep.insertion.child(&inst_name),
            config_ports: top_ports,
            shell_config_ports: shell_cfg,
        });
    }
    let design = Design::new(ed.top, ed.modules.into_values())?.pruned();
    Ok(RedactedDesign { design, shells })
}

/// Manifest document describing the redaction.
pub fn manifest(original: &Design, plan: &RedactionPlan, redacted: &RedactedDesign, units: &[RedactionUnit]) -> serde_json::Value {
    let efpgas: Vec<serde_json::Value> = plan
        .efpgas
        .iter()
        .zip(&redacted.shells)
        .map(|(ep, shell)| {
            let r = &units[ep.index].result;
            serde_json::json!({
                "index": ep.index,
                "cluster_id": ep.cluster_id,
                "redacted_instances": ep.members,
                "insertion_point": ep.insertion,
                "shell_module": shell.module,
                "shell_instance": shell.instance,
                "config_ports": shell.config_ports,
                "n": r.params.n,
                "k": r.params.k,
                "i": r.params.i(),
                "grid_side": r.grid_side,
                "lut_count": r.lut_count,
                "clb_count": r.clb_count,
                "clb_util": r.clb_util,
                "io_util": r.io_util,
                "area_estimate": r.area_estimate,
                "bitstream_bits": r.bitstream_bits,
                "fabric_spec": format!("efpga_{}.fabric.json", ep.index),
                "added_port_bits": ep.added_port_bits.iter().map(|(p, b)| (p.to_string(), *b)).collect::<BTreeMap<_, _>>(),
            })
        })
        .collect();
    let all: Vec<&InstancePath> = plan.efpgas.iter().flat_map(|e| &e.members).collect();
    serde_json::json!({
        "top": original.top(),
        "redacted_instances": all,
        "efpgas": efpgas,
        "total_bitstream_bits": units.iter().map(|u| u.result.bitstream_bits).sum::<u64>(),
    })
}

/// Writes `top_redacted.v`, one `efpga_<i>.fabric.json` per eFPGA and
/// `manifest.json`. Returns the paths written.
pub fn emit(
    original: &Design,
    plan: &RedactionPlan,
    redacted: &RedactedDesign,
    units: &[RedactionUnit],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, RewriteError> {
    let io = |path: &Path, e| RewriteError::Io { path: path.to_path_buf(), source: e };
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, text: String| -> Result<(), RewriteError> {
        let path = out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    write("top_redacted.v".into(), emit_verilog(&redacted.design))?;
    for (ep, shell) in plan.efpgas.iter().zip(&redacted.shells) {
        let unit = &units[ep.index];
        let mut spec = unit.result.spec_json();
        spec["shell_module"] = shell.module.clone().into();
        spec["cluster_id"] = ep.cluster_id.clone().into();
        spec["port_map"] = serde_json::to_value(&unit.wrapper.port_map).unwrap();
        write(format!("efpga_{}.fabric.json", ep.index), pretty(&spec))?;
    }
    write("manifest.json".into(), pretty(&manifest(original, plan, redacted, units)))?;
    Ok(written)
}

pub(crate) fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{build_wrapper, Cluster};
    use crate::equiv::{check, EquivOptions};
    use crate::fabric::{characterize, FabricParams};
    use crate::ir::{flatten, parse_verilog};

    fn unit(design: &Design, members: &[&str]) -> RedactionUnit {
        let paths: Vec<InstancePath> = members.iter().map(|m| InstancePath::new(*m)).collect();
        let io = paths.iter().map(|p| design.module_at(p).unwrap().io_pins()).sum();
        let wrapper = build_wrapper(design, &Cluster::new(paths, io)).unwrap();
        let result = characterize(&wrapper.design, &FabricParams::new(4, 4)).unwrap();
        RedactionUnit { wrapper, result }
    }

    fn redact(design: &Design, units: &[RedactionUnit]) -> (RedactionPlan, RedactedDesign) {
        let plan = plan_redaction(design, units).unwrap();
        let red = apply_redaction(design, &plan, units).unwrap();
        let a = flatten(design, design.top()).unwrap();
        let b = red.configured(units).unwrap();
        assert!(check(&a, &b, &EquivOptions::default()).unwrap().equivalent());
        (plan, red)
    }

    #[test]
    fn inverter_in_place() {
        let d = parse_verilog(
            "module inv(input a, output y); assign y = ~a; endmodule
             module top(input a, output y); inv u(.a(a), .y(y)); endmodule",
        )
        .unwrap();
        let units = [unit(&d, &["top.u"])];
        let (plan, red) = redact(&d, &units);
        assert_eq!(plan.efpgas[0].insertion, InstancePath::new("top"));
        assert_eq!(plan.efpgas[0].added_port_bits.len(), 1);
        assert!(red.design.module("inv").is_none());
        let text = emit_verilog(&red.design);
        assert!(text.contains("efpga0_scan_out") && !text.contains("module inv"));
    }

    #[test]
    fn cousins_punch_through_both_parents() {
        let d = parse_verilog(
            "module leaf(input [1:0] a, output y); assign y = a[0] ^ a[1]; endmodule
             module mid(input [1:0] a, output y, output z); leaf l(.a(a), .y(y)); assign z = a[0]; endmodule
             module top(input [1:0] a, b, output y1, z1, y2, z2);
               mid m1(.a(a), .y(y1), .z(z1));
               mid m2(.a(b), .y(y2), .z(z2));
             endmodule",
        )
        .unwrap();
        let units = [unit(&d, &["top.m1.l", "top.m2.l"])];
        let (plan, red) = redact(&d, &units);
        let ep = &plan.efpgas[0];
        assert_eq!(ep.insertion, InstancePath::new("top"));
        assert_eq!(ep.added_port_bits[&InstancePath::new("top.m1")], 3);
        assert_eq!(ep.added_port_bits[&InstancePath::new("top.m2")], 3);
        // both mid instances were edited, so the shared definition was cloned
        assert!(red.design.module("leaf").is_none());
        assert_eq!(red.design.tree().len(), 4);
    }

    #[test]
    fn partial_redaction_keeps_other_instance() {
        let d = parse_verilog(
            "module leaf(input a, output y); assign y = ~a; endmodule
             module mid(input a, output y); leaf l(.a(a), .y(y)); endmodule
             module top(input a, b, output y1, y2); mid m1(.a(a), .y(y1)); mid m2(.a(b), .y(y2)); endmodule",
        )
        .unwrap();
        let units = [unit(&d, &["top.m1.l"])];
        let (plan, red) = redact(&d, &units);
        assert_eq!(plan.efpgas[0].insertion, InstancePath::new("top.m1"));
        assert!(red.design.tree().contains(&InstancePath::new("top.m2.l")));
        assert!(!red.design.tree().contains(&InstancePath::new("top.m1.l")));
        assert_eq!(red.shells[0].config_ports["prog_clk"], "efpga0_prog_clk");
    }

    #[test]
    fn emit_three_files() {
        let d = parse_verilog(
            "module inv(input a, output y); assign y = ~a; endmodule
             module top(input a, output y); inv u(.a(a), .y(y)); endmodule",
        )
        .unwrap();
        let units = [unit(&d, &["top.u"])];
        let (plan, red) = redact(&d, &units);
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&d, &plan, &red, &units, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let text = std::fs::read_to_string(dir.path().join("top_redacted.v")).unwrap();
        let back = parse_verilog(&text).unwrap();
        assert_eq!(back.top(), "top");
    }
}
