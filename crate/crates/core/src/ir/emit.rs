// SPDX-License-Identifier: Apache-2.0
use std::collections::HashMap;
use std::fmt::Write;

use super::{BitRef, Design, Direction, GateKind, ModuleDef};

/// Writes the design as Verilog in the subset accepted by
/// [`parse_verilog`](super::parse_verilog): one continuous assignment per
/// combinational gate and one nonblocking assignment per flip-flop.
pub fn emit_verilog(design: &Design) -> String {
    let mut out = String::new();
    for m in design.modules() {
        emit_module(m, &mut out);
        out.push('\n');
    }
    out
}

fn range(width: u32) -> String {
    if width == 1 {
        String::new()
    } else {
        format!("[{}:0] ", width - 1)
    }
}

fn emit_module(m: &ModuleDef, out: &mut String) {
    // nets whose every driven bit comes from a flip-flop are declared `reg`
    let mut dff_bits: HashMap<&str, u32> = HashMap::new();
    let mut other_bits: HashMap<&str, u32> = HashMap::new();
    for g in &m.gates {
        let map = if g.kind == GateKind::Dff { &mut dff_bits } else { &mut other_bits };
        *map.entry(g.output.net.as_str()).or_default() += 1;
    }
    let is_reg = |n: &str| dff_bits.contains_key(n) && !other_bits.contains_key(n);
    let bit = |b: &BitRef| -> String {
        if m.nets.get(&b.net).copied().unwrap_or(1) == 1 {
            b.net.clone()
        } else {
            format!("{}[{}]", b.net, b.bit)
        }
    };

    if m.blackbox {
        out.push_str("(* blackbox *)\n");
    }
    let _ = write!(out, "module {}", m.name);
    if m.ports.is_empty() {
        out.push_str(";\n");
    } else {
        out.push_str(" (\n");
        for (i, p) in m.ports.iter().enumerate() {
            let dir = match p.direction {
                Direction::Input => "input",
                Direction::Output if is_reg(&p.name) => "output reg",
                Direction::Output => "output",
            };
            let sep = if i + 1 == m.ports.len() { "" } else { "," };
            let _ = writeln!(out, "  {dir} {}{}{sep}", range(p.width), p.name);
        }
        out.push_str(");\n");
    }
    for (name, &w) in &m.nets {
        if m.port(name).is_some() {
            continue;
        }
        let kind = if is_reg(name) { "reg" } else { "wire" };
        let _ = writeln!(out, "  {kind} {}{name};", range(w));
    }
    for g in &m.gates {
        let i = |k: usize| bit(&g.inputs[k]);
        let rhs = match g.kind {
            GateKind::And => format!("{} & {}", i(0), i(1)),
            GateKind::Or => format!("{} | {}", i(0), i(1)),
            GateKind::Xor => format!("{} ^ {}", i(0), i(1)),
            GateKind::Nand => format!("~({} & {})", i(0), i(1)),
            GateKind::Nor => format!("~({} | {})", i(0), i(1)),
            GateKind::Xnor => format!("~({} ^ {})", i(0), i(1)),
            GateKind::Not => format!("~{}", i(0)),
            GateKind::Mux2 => format!("{} ? {} : {}", i(0), i(1), i(2)),
            GateKind::Buf => i(0),
            GateKind::Const0 => "1'b0".into(),
            GateKind::Const1 => "1'b1".into(),
            GateKind::Dff => continue,
        };
        let _ = writeln!(out, "  assign {} = {rhs};", bit(&g.output));
    }
    let flops: Vec<_> = m.gates.iter().filter(|g| g.kind == GateKind::Dff).collect();
    if !flops.is_empty() {
        let clk = m.clock.as_deref().unwrap_or("clk");
        let _ = writeln!(out, "  always @(posedge {clk}) begin");
        for g in flops {
            let _ = writeln!(out, "    {} <= {};", bit(&g.output), bit(&g.inputs[0]));
        }
        out.push_str("  end\n");
    }
    for inst in &m.instances {
        let _ = write!(out, "  {} {} (", inst.module, inst.name);
        let conns: Vec<String> = inst
            .connections
            .iter()
            .map(|(port, bits)| format!(".{port}({})", concat(m, bits, &bit)))
            .collect();
        if conns.is_empty() {
            out.push_str(");\n");
        } else {
            let _ = writeln!(out, "\n    {}\n  );", conns.join(",\n    "));
        }
    }
    out.push_str("endmodule\n");
}

fn concat(m: &ModuleDef, bits: &[BitRef], bit: &dyn Fn(&BitRef) -> String) -> String {
    if bits.len() == 1 {
        return bit(&bits[0]);
    }
    let net = &bits[0].net;
    let whole = m.nets.get(net).copied() == Some(bits.len() as u32)
        && bits.iter().enumerate().all(|(i, b)| &b.net == net && b.bit == i as u32);
    if whole {
        return net.clone();
    }
    let parts: Vec<String> = bits.iter().rev().map(bit).collect();
    format!("{{{}}}", parts.join(", "))
}
