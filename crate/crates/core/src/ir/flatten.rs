// SPDX-License-Identifier: Apache-2.0
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{BitRef, Design, Direction, GateKind, InstancePath, IrError, ModuleDef, Result};
use crate::truth::TruthTable;

/// Flattened signal index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sig(pub u32);

impl Sig {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellOp {
    Gate(GateKind),
    Lut(TruthTable),
}

impl CellOp {
    pub fn is_sequential(&self) -> bool {
        matches!(self, CellOp::Gate(GateKind::Dff))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub op: CellOp,
    pub inputs: SmallVec<[Sig; 4]>,
    pub output: Sig,
    /// Index into [`FlatNetlist::instances`] of the instance whose body
    /// holds this cell.
    pub owner: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstancePins {
    pub path: InstancePath,
    pub module: String,
    pub inputs: Vec<(String, Vec<Sig>)>,
    pub outputs: Vec<(String, Vec<Sig>)>,
}

/// Single-level netlist of cells over numbered signals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatNetlist {
    pub names: Vec<String>,
    pub inputs: Vec<(String, Vec<Sig>)>,
    pub outputs: Vec<(String, Vec<Sig>)>,
    pub cells: Vec<Cell>,
    pub instances: Vec<InstancePins>,
    /// Signals driven by unbound black boxes. They read as 0.
    pub opaque: Vec<Sig>,
}

impl FlatNetlist {
    pub fn new_sig(&mut self, name: impl Into<String>) -> Sig {
        self.names.push(name.into());
        Sig(self.names.len() as u32 - 1)
    }

    pub fn num_signals(&self) -> usize {
        self.names.len()
    }

    pub fn input_bits(&self) -> usize {
        self.inputs.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn output_bits(&self) -> usize {
        self.outputs.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn input_sigs(&self) -> impl Iterator<Item = Sig> + '_ {
        self.inputs.iter().flat_map(|(_, s)| s.iter().copied())
    }

    pub fn output_sigs(&self) -> impl Iterator<Item = Sig> + '_ {
        self.outputs.iter().flat_map(|(_, s)| s.iter().copied())
    }

    pub fn has_flops(&self) -> bool {
        self.cells.iter().any(|c| c.op.is_sequential())
    }

    /// Driving cell of every signal, if any.
    pub fn drivers(&self) -> Vec<Option<usize>> {
        let mut d = vec![None; self.num_signals()];
        for (i, c) in self.cells.iter().enumerate() {
            d[c.output.idx()] = Some(i);
        }
        d
    }

    /// Combinational cells in topological order. Flip-flop outputs, inputs
    /// and opaque signals are sources. On a loop, returns a signal on it.
    pub fn comb_order(&self) -> std::result::Result<Vec<usize>, Sig> {
        let drivers = self.drivers();
        let n = self.cells.len();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        let mut order = Vec::with_capacity(n);
        for start in 0..n {
            if state[start] != 0 || self.cells[start].op.is_sequential() {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            state[start] = 1;
            while let Some(&mut (cell, ref mut next)) = stack.last_mut() {
                let inputs = &self.cells[cell].inputs;
                if *next < inputs.len() {
                    let sig = inputs[*next];
                    *next += 1;
                    if let Some(d) = drivers[sig.idx()] {
                        if self.cells[d].op.is_sequential() {
                            continue;
                        }
                        match state[d] {
                            0 => {
                                state[d] = 1;
                                stack.push((d, 0));
                            }
                            1 => return Err(sig),
                            _ => {}
                        }
                    }
                } else {
                    state[cell] = 2;
                    order.push(cell);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    /// Fanout count of every signal: cell reads plus primary output reads.
    pub fn fanouts(&self) -> Vec<u32> {
        let mut f = vec![0u32; self.num_signals()];
        for c in &self.cells {
            for s in &c.inputs {
                f[s.idx()] += 1;
            }
        }
        for s in self.output_sigs() {
            f[s.idx()] += 1;
        }
        f
    }
}

/// Flattens the hierarchy below `module`. Fails on unbound black boxes only
/// through simulation; here their outputs become opaque signals.
pub fn flatten(design: &Design, module: &str) -> Result<FlatNetlist> {
    flatten_with(design, module, &HashMap::new())
}

/// Like [`flatten`], but every instance of a module named in `bindings` is
/// replaced by that netlist (matched by port name), black box or not.
pub fn flatten_with(
    design: &Design,
    module: &str,
    bindings: &HashMap<String, FlatNetlist>,
) -> Result<FlatNetlist> {
    let def = design
        .module(module)
        .ok_or_else(|| IrError::MissingTop(module.to_string()))?;
    let mut net = FlatNetlist::default();
    let mut portmap: HashMap<BitRef, Sig> = HashMap::new();
    for port in &def.ports {
        let sigs: Vec<Sig> = (0..port.width)
            .map(|b| {
                let s = net.new_sig(format!("{}[{}]", port.name, b));
                portmap.insert(BitRef::new(&port.name, b), s);
                s
            })
            .collect();
        match port.direction {
            Direction::Input => net.inputs.push((port.name.clone(), sigs)),
            Direction::Output => net.outputs.push((port.name.clone(), sigs)),
        }
    }
    let root = InstancePath::root(module);
    net.instances.push(InstancePins {
        path: root.clone(),
        module: module.to_string(),
        inputs: net.inputs.clone(),
        outputs: net.outputs.clone(),
    });
    let mut fl = Flattener { design, bindings, net };
    fl.body(def, "", portmap, 0, &root)?;
    Ok(fl.net)
}

struct Flattener<'a> {
    design: &'a Design,
    bindings: &'a HashMap<String, FlatNetlist>,
    net: FlatNetlist,
}

impl Flattener<'_> {
    fn body(
        &mut self,
        def: &ModuleDef,
        prefix: &str,
        mut bits: HashMap<BitRef, Sig>,
        owner: u32,
        path: &InstancePath,
    ) -> Result<()> {
        for (name, &width) in &def.nets {
            if def.port(name).is_some() {
                continue;
            }
            for b in 0..width {
                let s = self.net.new_sig(format!("{prefix}{name}[{b}]"));
                bits.insert(BitRef::new(name.as_str(), b), s);
            }
        }
        let sig = |b: &BitRef| bits[b];
        for gate in &def.gates {
            self.net.cells.push(Cell {
                op: CellOp::Gate(gate.kind),
                inputs: gate.inputs.iter().map(sig).collect(),
                output: sig(&gate.output),
                owner,
            });
        }
        for inst in &def.instances {
            let child = self.design.module(&inst.module).ok_or_else(|| IrError::UnresolvedModule {
                module: def.name.clone(),
                target: inst.module.clone(),
            })?;
            let child_path = path.child(&inst.name);
            let mut pins = InstancePins {
                path: child_path.clone(),
                module: child.name.clone(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            };
            let mut child_bits = HashMap::new();
            for port in &child.ports {
                let conn: Vec<Sig> = inst.connections[&port.name].iter().map(sig).collect();
                for (b, s) in conn.iter().enumerate() {
                    child_bits.insert(BitRef::new(&port.name, b as u32), *s);
                }
                match port.direction {
                    Direction::Input => pins.inputs.push((port.name.clone(), conn)),
                    Direction::Output => pins.outputs.push((port.name.clone(), conn)),
                }
            }
            let child_owner = self.net.instances.len() as u32;
            self.net.instances.push(pins.clone());
            if let Some(binding) = self.bindings.get(&child.name) {
                self.inline(binding, &pins, child_owner, &format!("{prefix}{}.", inst.name))?;
            } else if child.blackbox {
                let outs: Vec<Sig> = pins.outputs.iter().flat_map(|(_, s)| s.iter().copied()).collect();
                self.net.opaque.extend(outs);
            } else {
                self.body(child, &format!("{prefix}{}.", inst.name), child_bits, child_owner, &child_path)?;
            }
        }
        Ok(())
    }

    fn inline(&mut self, binding: &FlatNetlist, pins: &InstancePins, owner: u32, prefix: &str) -> Result<()> {
        let mut map: Vec<Option<Sig>> = vec![None; binding.num_signals()];
        for (name, sigs) in &binding.inputs {
            let conn = pins
                .inputs
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| IrError::Invalid {
                    module: pins.module.clone(),
                    msg: format!("binding input `{name}` missing on the black box"),
                })?;
            if conn.1.len() != sigs.len() {
                return Err(IrError::WidthMismatch(format!("binding port `{name}` of `{}`", pins.module)));
            }
            for (s, c) in sigs.iter().zip(&conn.1) {
                map[s.idx()] = Some(*c);
            }
        }
        for (i, slot) in map.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = Some(self.net.new_sig(format!("{prefix}{}", binding.names[i])));
            }
        }
        let m = |s: Sig| map[s.idx()].unwrap();
        for cell in &binding.cells {
            self.net.cells.push(Cell {
                op: cell.op.clone(),
                inputs: cell.inputs.iter().map(|s| m(*s)).collect(),
                output: m(cell.output),
                owner,
            });
        }
        self.net.opaque.extend(binding.opaque.iter().map(|s| m(*s)));
        for (name, sigs) in &pins.outputs {
            // outputs the binding does not model read as 0
            let Some(inner) = binding.outputs.iter().find(|(n, _)| n == name) else {
                self.net.opaque.extend(sigs.iter().copied());
                continue;
            };
            if inner.1.len() != sigs.len() {
                return Err(IrError::WidthMismatch(format!("binding port `{name}` of `{}`", pins.module)));
            }
            for (src, dst) in inner.1.iter().zip(sigs) {
                self.net.cells.push(Cell {
                    op: CellOp::Gate(GateKind::Buf),
                    inputs: [m(*src)].into_iter().collect(),
                    output: *dst,
                    owner,
                });
            }
        }
        Ok(())
    }
}
