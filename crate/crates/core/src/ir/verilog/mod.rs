// SPDX-License-Identifier: Apache-2.0
//! Structural/RTL Verilog subset front end.
//!
//! See `docs/verilog-subset.md` for the accepted grammar. Elaboration is
//! bit-blasted: every operator becomes primitive gates, and nonblocking
//! assignments in `always @(posedge clk)` blocks become `DFF`s whose data
//! inputs are the if/else-resolved next-state functions.

mod ast;
mod elab;
mod lexer;
mod parser;

use std::collections::{HashMap, HashSet};

use super::{Design, IrError, Result};

/// Parses and elaborates `source`. The top module is the one no other module
/// instantiates; when several qualify, the last one in the file is taken.
pub fn parse_verilog(source: &str) -> Result<Design> {
    parse_verilog_inner(source, None)
}

pub fn parse_verilog_with_top(source: &str, top: &str) -> Result<Design> {
    parse_verilog_inner(source, Some(top))
}

fn parse_verilog_inner(source: &str, top: Option<&str>) -> Result<Design> {
    let asts = parser::Parser::new(lexer::lex(source)?).source()?;
    if asts.is_empty() {
        return Err(IrError::Syntax { line: 1, col: 1, msg: "no module definitions".into() });
    }
    let mut sigs = HashMap::new();
    for ast in &asts {
        if sigs.contains_key(&ast.name) {
            return Err(IrError::Syntax {
                line: ast.pos.line,
                col: ast.pos.col,
                msg: format!("module `{}` defined twice", ast.name),
            });
        }
        sigs.insert(ast.name.clone(), elab::signature(ast)?);
    }
    let modules = asts.iter().map(|a| elab::elaborate(a, &sigs)).collect::<Result<Vec<_>>>()?;
    let top = match top {
        Some(t) => t.to_string(),
        None => {
            let used: HashSet<&str> =
                modules.iter().flat_map(|m| m.instances.iter().map(|i| i.module.as_str())).collect();
            modules
                .iter()
                .rev()
                .find(|m| !used.contains(m.name.as_str()) && !m.blackbox)
                .or_else(|| modules.iter().rev().find(|m| !used.contains(m.name.as_str())))
                .map(|m| m.name.clone())
                .ok_or_else(|| IrError::RecursiveHierarchy(modules[0].name.clone()))?
        }
    };
    Design::new(top, modules)
}
