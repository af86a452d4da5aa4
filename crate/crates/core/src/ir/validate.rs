// SPDX-License-Identifier: Apache-2.0
use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use super::{flatten, BitRef, Design, Direction, IrError, ModuleDef, Result};

fn invalid(module: &ModuleDef, msg: impl Into<String>) -> IrError {
    IrError::Invalid { module: module.name.clone(), msg: msg.into() }
}

fn check_bit(module: &ModuleDef, bit: &BitRef) -> Result<()> {
    match module.nets.get(&bit.net) {
        Some(&w) if bit.bit < w => Ok(()),
        Some(&w) => Err(invalid(module, format!("bit `{bit}` out of range for {w}-bit net"))),
        None => Err(invalid(module, format!("reference to undeclared net `{}`", bit.net))),
    }
}

pub(crate) fn check_module(module: &ModuleDef, modules: &IndexMap<String, ModuleDef>) -> Result<()> {
    let mut names = HashSet::new();
    for port in &module.ports {
        if port.width == 0 {
            return Err(invalid(module, format!("port `{}` has zero width", port.name)));
        }
        if !names.insert(port.name.as_str()) {
            return Err(invalid(module, format!("duplicate port `{}`", port.name)));
        }
        if module.nets.get(&port.name) != Some(&port.width) {
            return Err(invalid(module, format!("port `{}` has no matching net", port.name)));
        }
    }
    if let Some((name, _)) = module.nets.iter().find(|(_, w)| **w == 0) {
        return Err(invalid(module, format!("net `{name}` has zero width")));
    }
    if module.blackbox {
        if !module.gates.is_empty() || !module.instances.is_empty() {
            return Err(invalid(module, "black-box module has a body"));
        }
        return Ok(());
    }

    let mut drivers: HashSet<BitRef> = HashSet::new();
    let mut reads: Vec<&BitRef> = Vec::new();
    let mut drive = |bit: BitRef| -> Result<()> {
        if !drivers.insert(bit.clone()) {
            return Err(IrError::MultipleDrivers { module: module.name.clone(), bit: bit.to_string() });
        }
        Ok(())
    };
    for port in module.inputs() {
        for b in 0..port.width {
            drive(BitRef::new(&port.name, b))?;
        }
    }
    for gate in &module.gates {
        if gate.inputs.len() != gate.kind.arity() {
            return Err(invalid(
                module,
                format!("{} gate driving `{}` has {} inputs", gate.kind, gate.output, gate.inputs.len()),
            ));
        }
        for bit in gate.inputs.iter().chain(std::iter::once(&gate.output)) {
            check_bit(module, bit)?;
        }
        drive(gate.output.clone())?;
        reads.extend(gate.inputs.iter());
    }
    let mut inst_names = HashSet::new();
    for inst in &module.instances {
        if !inst_names.insert(inst.name.as_str()) {
            return Err(invalid(module, format!("duplicate instance `{}`", inst.name)));
        }
        let child = modules.get(&inst.module).ok_or_else(|| IrError::UnresolvedModule {
            module: module.name.clone(),
            target: inst.module.clone(),
        })?;
        for port_name in inst.connections.keys() {
            if child.port(port_name).is_none() {
                return Err(invalid(
                    module,
                    format!("instance `{}` connects unknown port `{port_name}` of `{}`", inst.name, child.name),
                ));
            }
        }
        for port in &child.ports {
            let bits = inst.connections.get(&port.name).ok_or_else(|| IrError::UnconnectedPort {
                module: module.name.clone(),
                instance: inst.name.clone(),
                port: port.name.clone(),
            })?;
            if bits.len() != port.width as usize {
                return Err(IrError::WidthMismatch(format!(
                    "module `{}`: instance `{}` port `{}` is {} bits, connected to {}",
                    module.name,
                    inst.name,
                    port.name,
                    port.width,
                    bits.len()
                )));
            }
            for bit in bits {
                check_bit(module, bit)?;
                match port.direction {
                    Direction::Input => reads.push(bit),
                    Direction::Output => drive(bit.clone())?,
                }
            }
        }
    }
    let out_bits: Vec<BitRef> = module
        .outputs()
        .flat_map(|p| (0..p.width).map(move |b| BitRef::new(&p.name, b)))
        .collect();
    for bit in reads.into_iter().chain(out_bits.iter()) {
        if !drivers.contains(bit) {
            return Err(IrError::Undriven { module: module.name.clone(), bit: bit.to_string() });
        }
    }

    let has_flops = module.has_flops();
    match &module.clock {
        Some(clk) => match module.port(clk) {
            Some(p) if p.direction == Direction::Input && p.width == 1 => {}
            _ => return Err(invalid(module, format!("clock `{clk}` is not a 1-bit input port"))),
        },
        None if has_flops => return Err(invalid(module, "flip-flops present but no clock port")),
        None => {}
    }
    Ok(())
}

/// Rejects combinational loops, including loops that cross module
/// boundaries. Every module is checked as a flattening root.
pub(crate) fn check_acyclic(design: &Design) -> Result<()> {
    let in_tree: HashSet<&str> = design.tree().nodes().map(|n| n.module.as_str()).collect();
    let roots = std::iter::once(design.top())
        .chain(design.modules().map(|m| m.name.as_str()).filter(|m| !in_tree.contains(m)));
    for root in roots {
        if design.module(root).is_some_and(|m| m.blackbox) {
            continue;
        }
        let flat = flatten::flatten_with(design, root, &HashMap::new())?;
        if let Err(sig) = flat.comb_order() {
            return Err(IrError::CombinationalCycle {
                module: root.to_string(),
                bit: flat.names[sig.0 as usize].clone(),
            });
        }
    }
    Ok(())
}
