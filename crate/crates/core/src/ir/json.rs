// SPDX-License-Identifier: Apache-2.0
//! JSON netlist IR.
//!
//! ```json
//! {"top": "inv",
//!  "modules": {"inv": {"ports": [{"name": "a", "dir": "input", "width": 1},
//!                                {"name": "y", "dir": "output", "width": 1}],
//!                      "gates": [{"kind": "NOT", "inputs": ["a"], "output": "y"}],
//!                      "instances": []}}}
//! ```
//!
//! Bits are written `net` (bit 0) or `net[i]`; instance connections list the
//! parent bits LSB first. Nets are implied by the ports and the bits
//! referenced. A module with `DFF` gates is clocked by its 1-bit input port
//! `clk`, which must exist.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{BitRef, Design, Direction, Gate, GateKind, Instance, IrError, ModuleDef, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDesign {
    top: String,
    modules: IndexMap<String, JsonModule>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonModule {
    ports: Vec<JsonPort>,
    gates: Vec<JsonGate>,
    instances: Vec<JsonInstance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonPort {
    name: String,
    dir: Direction,
    width: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGate {
    kind: String,
    inputs: Vec<String>,
    output: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonInstance {
    name: String,
    module: String,
    connections: IndexMap<String, Vec<String>>,
}

const CLOCK_PORT: &str = "clk";

fn bit(text: &str) -> Result<BitRef> {
    BitRef::parse(text).ok_or_else(|| IrError::Schema(format!("malformed bit reference `{text}`")))
}

pub fn parse_json_ir(source: &str) -> Result<Design> {
    let raw: JsonDesign = serde_json::from_str(source).map_err(|e| IrError::Schema(e.to_string()))?;
    let mut modules = Vec::with_capacity(raw.modules.len());
    for (name, jm) in raw.modules {
        let mut m = ModuleDef::new(&name);
        for p in &jm.ports {
            if m.nets.contains_key(&p.name) {
                return Err(IrError::Invalid { module: name.clone(), msg: format!("duplicate port `{}`", p.name) });
            }
            m.add_port(&p.name, p.dir, p.width);
        }
        let widen = |m: &mut ModuleDef, b: &BitRef| {
            if m.port(&b.net).is_none() {
                let w = m.nets.entry(b.net.clone()).or_insert(0);
                *w = (*w).max(b.bit + 1);
            }
        };
        for g in &jm.gates {
            let kind = GateKind::from_name(&g.kind)
                .ok_or_else(|| IrError::Schema(format!("unknown gate kind `{}`", g.kind)))?;
            let inputs = g.inputs.iter().map(|s| bit(s)).collect::<Result<Vec<_>>>()?;
            let output = bit(&g.output)?;
            for b in inputs.iter().chain(std::iter::once(&output)) {
                widen(&mut m, b);
            }
            m.gates.push(Gate::new(kind, inputs, output));
        }
        for ji in &jm.instances {
            let mut connections = IndexMap::new();
            for (port, bits) in &ji.connections {
                let bits = bits.iter().map(|s| bit(s)).collect::<Result<Vec<_>>>()?;
                for b in &bits {
                    widen(&mut m, b);
                }
                connections.insert(port.clone(), bits);
            }
            m.instances.push(Instance { name: ji.name.clone(), module: ji.module.clone(), connections });
        }
        if m.has_flops() {
            match m.port(CLOCK_PORT) {
                Some(p) if p.direction == Direction::Input && p.width == 1 => {
                    m.clock = Some(CLOCK_PORT.to_string())
                }
                _ => {
                    return Err(IrError::Schema(format!(
                        "module `{name}` has DFF gates but no 1-bit input port `{CLOCK_PORT}`"
                    )))
                }
            }
        }
        modules.push(m);
    }
    Design::new(raw.top, modules)
}

fn bit_text(b: &BitRef) -> String {
    b.to_string()
}

/// Serializes a design to the JSON IR. Black-box modules cannot be
/// expressed and are rejected.
pub fn design_to_json(design: &Design) -> Result<String> {
    let mut modules = IndexMap::new();
    for m in design.modules() {
        if m.blackbox {
            return Err(IrError::Schema(format!("black-box module `{}` has no JSON form", m.name)));
        }
        if m.has_flops() && m.clock.as_deref() != Some(CLOCK_PORT) {
            return Err(IrError::Schema(format!(
                "module `{}` must be clocked by `{CLOCK_PORT}` to be written as JSON",
                m.name
            )));
        }
        modules.insert(
            m.name.clone(),
            JsonModule {
                ports: m
                    .ports
                    .iter()
                    .map(|p| JsonPort { name: p.name.clone(), dir: p.direction, width: p.width })
                    .collect(),
                gates: m
                    .gates
                    .iter()
                    .map(|g| JsonGate {
                        kind: g.kind.name().to_string(),
                        inputs: g.inputs.iter().map(bit_text).collect(),
                        output: bit_text(&g.output),
                    })
                    .collect(),
                instances: m
                    .instances
                    .iter()
                    .map(|i| JsonInstance {
                        name: i.name.clone(),
                        module: i.module.clone(),
                        connections: i
                            .connections
                            .iter()
                            .map(|(p, bits)| (p.clone(), bits.iter().map(bit_text).collect()))
                            .collect(),
                    })
                    .collect(),
            },
        );
    }
    let doc = JsonDesign { top: design.top().to_string(), modules };
    Ok(serde_json::to_string_pretty(&doc).expect("JSON IR serialization cannot fail"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV: &str = r#"{"top":"inv","modules":{"inv":{
        "ports":[{"name":"a","dir":"input","width":1},{"name":"y","dir":"output","width":1}],
        "gates":[{"kind":"NOT","inputs":["a"],"output":"y"}],"instances":[]}}}"#;

    #[test]
    fn inverter_parses() {
        let d = parse_json_ir(INV).unwrap();
        assert_eq!(d.top_module().gates.len(), 1);
        assert_eq!(d.top_module().gates[0].kind, GateKind::Not);
    }

    #[test]
    fn two_drivers_rejected() {
        let src = r#"{"top":"m","modules":{"m":{
            "ports":[{"name":"a","dir":"input","width":1},{"name":"y","dir":"output","width":1}],
            "gates":[{"kind":"NOT","inputs":["a"],"output":"y"},{"kind":"BUF","inputs":["a"],"output":"y"}],
            "instances":[]}}}"#;
        assert!(matches!(parse_json_ir(src), Err(IrError::MultipleDrivers { .. })));
    }

    #[test]
    fn unknown_fields_rejected() {
        let src = INV.replace("\"instances\":[]", "\"instances\":[],\"extra\":1");
        assert!(matches!(parse_json_ir(&src), Err(IrError::Schema(_))));
    }

    #[test]
    fn bad_arity_rejected() {
        let src = INV.replace(r#"["a"],"output""#, r#"["a","a"],"output""#);
        assert!(matches!(parse_json_ir(&src), Err(IrError::Invalid { .. })));
    }

    #[test]
    fn round_trip() {
        let d = parse_json_ir(INV).unwrap();
        let again = parse_json_ir(&design_to_json(&d).unwrap()).unwrap();
        assert_eq!(d, again);
    }
}
