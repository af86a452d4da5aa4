// SPDX-License-Identifier: Apache-2.0
//! Cluster enumeration and wrapper synthesis.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::ModuleScore;
use crate::ir::{net_bits, Design, Direction, Instance, InstancePath, IrError, ModuleDef};

pub const DEFAULT_CLUSTER_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("more than {cap} valid clusters; tighten max_io or reduce the candidates")]
    CapExceeded { cap: usize },
    #[error("instance `{0}` not found")]
    UnknownInstance(String),
    #[error("cluster members `{0}` and `{1}` are not hierarchy-independent")]
    Dependent(String, String),
    #[error("wrapper port `{0}` collides after prefixing")]
    PortCollision(String),
    #[error("empty cluster")]
    Empty,
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cluster {
    /// Canonical id: sorted member paths joined by `+`.
    pub id: String,
    pub members: Vec<InstancePath>,
    pub aggregate_io: u32,
}

impl Cluster {
    pub fn new(mut members: Vec<InstancePath>, aggregate_io: u32) -> Self {
        members.sort();
        members.dedup();
        let id = members.iter().map(InstancePath::as_str).collect::<Vec<_>>().join("+");
        Self { id, members, aggregate_io }
    }

    pub fn overlaps(&self, other: &Cluster) -> bool {
        self.members.iter().any(|m| other.members.binary_search(m).is_ok())
    }
}

/// No member is an ancestor of another, and the summed I/O fits.
pub fn is_valid_cluster(design: &Design, members: &[InstancePath], max_io: u32) -> Result<bool, ClusterError> {
    let mut io = 0u64;
    for m in members {
        let def = design.module_at(m).ok_or_else(|| ClusterError::UnknownInstance(m.to_string()))?;
        io += def.io_pins() as u64;
    }
    let independent = members
        .iter()
        .enumerate()
        .all(|(i, a)| members[i + 1..].iter().all(|b| a != b && !a.is_ancestor_of(b) && !b.is_ancestor_of(a)));
    Ok(!members.is_empty() && independent && io <= max_io as u64)
}

/// All valid clusters over the candidates. Validity is closed under taking
/// subsets, so growing each cluster only by candidates ranked after its
/// last member reaches every valid subset exactly once; the pairwise-union
/// fixed point is the same set. Ordered by size, then candidate rank.
pub fn identify_clusters(candidates: &[ModuleScore], max_io: u32, cap: usize) -> Result<Vec<Cluster>, ClusterError> {
    let n = candidates.len();
    let compatible = |a: usize, b: usize| {
        let (x, y) = (&candidates[a].instance_path, &candidates[b].instance_path);
        x != y && !x.is_ancestor_of(y) && !y.is_ancestor_of(x)
    };
    // (member indices ascending, io)
    let mut level: Vec<(Vec<usize>, u64)> = (0..n)
        .filter(|&i| candidates[i].io_pins <= max_io)
        .map(|i| (vec![i], candidates[i].io_pins as u64))
        .collect();
    let mut all: Vec<(Vec<usize>, u64)> = Vec::new();
    while !level.is_empty() {
        if all.len() + level.len() > cap {
            return Err(ClusterError::CapExceeded { cap });
        }
        let mut next = Vec::new();
        for (members, io) in &level {
            let last = *members.last().unwrap();
            for j in last + 1..n {
                let io2 = io + candidates[j].io_pins as u64;
                if io2 <= max_io as u64 && members.iter().all(|&m| compatible(m, j)) {
                    let mut grown = members.clone();
                    grown.push(j);
                    next.push((grown, io2));
                }
            }
            if all.len() + level.len() + next.len() > cap.saturating_mul(2) {
                return Err(ClusterError::CapExceeded { cap });
            }
        }
        all.append(&mut level);
        level = next;
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(all.len());
    for (members, io) in all {
        let c = Cluster::new(members.iter().map(|&m| candidates[m].instance_path.clone()).collect(), io as u32);
        if seen.insert(c.id.clone()) {
            out.push(c);
        }
    }
    Ok(out)
}

pub fn clusters_csv(clusters: &[Cluster]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster_id", "member_count", "aggregate_io"]).unwrap();
    for c in clusters {
        w.write_record([&c.id, &c.members.len().to_string(), &c.aggregate_io.to_string()]).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortBinding {
    pub member: InstancePath,
    pub port: String,
    pub direction: Direction,
    pub width: u32,
    pub wrapper_port: String,
}

/// A design whose top instantiates every cluster member side by side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapperModule {
    pub cluster: Cluster,
    pub design: Design,
    pub port_map: Vec<PortBinding>,
}

impl WrapperModule {
    pub fn name(&self) -> &str {
        self.design.top()
    }

    pub fn module(&self) -> &ModuleDef {
        self.design.top_module()
    }
}

/// Builds the wrapper. Wrapper ports are named `<member>_<port>`, where
/// `<member>` is the member path below the root joined by `_`.
pub fn build_wrapper(design: &Design, cluster: &Cluster) -> Result<WrapperModule, ClusterError> {
    if cluster.members.is_empty() {
        return Err(ClusterError::Empty);
    }
    for (i, a) in cluster.members.iter().enumerate() {
        for b in &cluster.members[i + 1..] {
            if a.is_ancestor_of(b) || b.is_ancestor_of(a) {
                return Err(ClusterError::Dependent(a.to_string(), b.to_string()));
            }
        }
    }
    let mut name = "efpga_wrapper".to_string();
    let mut suffix = 0;
    while design.module(&name).is_some() {
        suffix += 1;
        name = format!("efpga_wrapper_{suffix}");
    }
    let mut wrapper = ModuleDef::new(&name);
    let mut port_map = Vec::new();
    let mut instance_names = HashSet::new();
    for member in &cluster.members {
        let def = design.module_at(member).ok_or_else(|| ClusterError::UnknownInstance(member.to_string()))?;
        let prefix = member.flat_name();
        if !instance_names.insert(prefix.clone()) {
            return Err(ClusterError::PortCollision(prefix));
        }
        let mut inst = Instance { name: prefix.clone(), module: def.name.clone(), connections: Default::default() };
        for port in &def.ports {
            let wp = format!("{prefix}_{}", port.name);
            if wrapper.port(&wp).is_some() {
                return Err(ClusterError::PortCollision(wp));
            }
            wrapper.add_port(&wp, port.direction, port.width);
            inst.connections.insert(port.name.clone(), net_bits(&wp, port.width));
            port_map.push(PortBinding {
                member: member.clone(),
                port: port.name.clone(),
                direction: port.direction,
                width: port.width,
                wrapper_port: wp,
            });
        }
        wrapper.instances.push(inst);
    }
    let modules = design.modules().cloned().chain(std::iter::once(wrapper));
    let sub = Design::new(name, modules)?.pruned();
    Ok(WrapperModule { cluster: cluster.clone(), design: sub, port_map })
}
