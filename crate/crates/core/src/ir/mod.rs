// SPDX-License-Identifier: Apache-2.0
//! Hierarchical gate-level design representation.
//!
//! A [`Design`] is a set of [`ModuleDef`]s plus the [`InstanceTree`] rooted at
//! the top module. Module bodies hold bit-blasted primitive [`Gate`]s and child
//! [`Instance`]s whose ports are connected bit by bit. Every constructor goes
//! through [`Design::new`], which checks the structural invariants (single
//! driver per bit, resolved references, no combinational cycles, finite
//! hierarchy), so a `Design` value is always well formed.

mod emit;
mod flatten;
mod iso;
mod json;
pub(crate) mod sim;
mod tree;
mod validate;
pub mod verilog;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emit::emit_verilog;
pub use flatten::{flatten, flatten_with, Cell, CellOp, FlatNetlist, InstancePins, Sig};
pub use iso::isomorphic;
pub use json::{design_to_json, parse_json_ir};
pub use sim::{simulate, Simulator};
pub use tree::{InstancePath, InstanceTree, TreeNode};
pub use verilog::{parse_verilog, parse_verilog_with_top};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unsupported construct: {what}")]
    Unsupported { line: usize, col: usize, what: String },
    #[error("module `{module}`: unresolved module reference `{target}`")]
    UnresolvedModule { module: String, target: String },
    #[error("module `{module}`: net bit `{bit}` has multiple drivers")]
    MultipleDrivers { module: String, bit: String },
    #[error("module `{module}`: net bit `{bit}` is read but never driven")]
    Undriven { module: String, bit: String },
    #[error("module `{module}`: combinational cycle through `{bit}`")]
    CombinationalCycle { module: String, bit: String },
    #[error("module `{module}`: instance `{instance}` leaves port `{port}` unconnected")]
    UnconnectedPort { module: String, instance: String, port: String },
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("module `{module}`: {msg}")]
    Invalid { module: String, msg: String },
    #[error("recursive instantiation of module `{0}`")]
    RecursiveHierarchy(String),
    #[error("top module `{0}` not found")]
    MissingTop(String),
    #[error("module `{module}` is a black box with no binding")]
    UnboundBlackBox { module: String },
}

pub type Result<T, E = IrError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
}

impl PortDecl {
    pub fn new(name: impl Into<String>, direction: Direction, width: u32) -> Self {
        Self { name: name.into(), direction, width }
    }
}

/// One bit of a named net. Bit 0 is the least significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitRef {
    pub net: String,
    pub bit: u32,
}

impl BitRef {
    pub fn new(net: impl Into<String>, bit: u32) -> Self {
        Self { net: net.into(), bit }
    }

    /// Parses `name` (bit 0) or `name[3]`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some(open) = text.find('[') {
            let close = text.strip_suffix(']')?;
            let name = &text[..open];
            let idx = close[open + 1..].trim().parse().ok()?;
            is_identifier(name).then(|| Self::new(name, idx))
        } else {
            is_identifier(text).then(|| Self::new(text, 0))
        }
    }
}

impl fmt::Display for BitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.net, self.bit)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Bits of `net` from 0 to `width - 1`.
pub fn net_bits(net: &str, width: u32) -> Vec<BitRef> {
    (0..width).map(|b| BitRef::new(net, b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Not,
    Xor,
    Nand,
    Nor,
    Xnor,
    Mux2,
    Buf,
    Const0,
    Const1,
    Dff,
}

impl GateKind {
    pub const ALL: [GateKind; 12] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Not,
        GateKind::Xor,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xnor,
        GateKind::Mux2,
        GateKind::Buf,
        GateKind::Const0,
        GateKind::Const1,
        GateKind::Dff,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Const0 | GateKind::Const1 => 0,
            GateKind::Not | GateKind::Buf | GateKind::Dff => 1,
            GateKind::Mux2 => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Xor => "XOR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xnor => "XNOR",
            GateKind::Mux2 => "MUX2",
            GateKind::Buf => "BUF",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
            GateKind::Dff => "DFF",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_sequential(self) -> bool {
        self == GateKind::Dff
    }

    /// Evaluates a combinational gate over 64 parallel lanes.
    ///
    /// `MUX2` inputs are `[sel, a, b]` and the output is `sel ? a : b`.
    #[inline]
    pub fn eval(self, ins: &[u64]) -> u64 {
        match self {
            GateKind::And => ins[0] & ins[1],
            GateKind::Or => ins[0] | ins[1],
            GateKind::Not => !ins[0],
            GateKind::Xor => ins[0] ^ ins[1],
            GateKind::Nand => !(ins[0] & ins[1]),
            GateKind::Nor => !(ins[0] | ins[1]),
            GateKind::Xnor => !(ins[0] ^ ins[1]),
            GateKind::Mux2 => (ins[0] & ins[1]) | (!ins[0] & ins[2]),
            GateKind::Buf | GateKind::Dff => ins[0],
            GateKind::Const0 => 0,
            GateKind::Const1 => !0,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<BitRef>,
    pub output: BitRef,
}

impl Gate {
    pub fn new(kind: GateKind, inputs: Vec<BitRef>, output: BitRef) -> Self {
        Self { kind, inputs, output }
    }
}

/// A child instantiation. `connections` maps each child port to the parent
/// bits it is wired to, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub module: String,
    pub connections: IndexMap<String, Vec<BitRef>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModuleDef {
    pub name: String,
    pub ports: Vec<PortDecl>,
    /// Every net of the module with its width, ports included.
    pub nets: IndexMap<String, u32>,
    pub gates: Vec<Gate>,
    pub instances: Vec<Instance>,
    /// Input port clocking the module's flip-flops, if it has any.
    pub clock: Option<String>,
    /// Interface-only module whose body is supplied elsewhere.
    pub blackbox: bool,
}

impl ModuleDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    /// Declares a port and its net.
    pub fn add_port(&mut self, name: &str, direction: Direction, width: u32) {
        self.ports.push(PortDecl::new(name, direction, width));
        self.nets.insert(name.to_string(), width);
    }

    pub fn add_net(&mut self, name: &str, width: u32) {
        self.nets.insert(name.to_string(), width);
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::Output)
    }

    pub fn input_bits(&self) -> u32 {
        self.inputs().map(|p| p.width).sum()
    }

    pub fn output_bits(&self) -> u32 {
        self.outputs().map(|p| p.width).sum()
    }

    /// Total interface width: input plus output bits.
    pub fn io_pins(&self) -> u32 {
        self.ports.iter().map(|p| p.width).sum()
    }

    pub fn has_flops(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Dff)
    }

    /// Returns a net name not yet used in the module, derived from `base`.
    pub fn fresh_net_name(&self, base: &str) -> String {
        if !self.nets.contains_key(base) {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| !self.nets.contains_key(n))
            .expect("unbounded suffix search")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    top: String,
    modules: IndexMap<String, ModuleDef>,
    tree: InstanceTree,
}

impl Design {
    /// Builds and validates a design.
    pub fn new(top: impl Into<String>, modules: impl IntoIterator<Item = ModuleDef>) -> Result<Self> {
        let top = top.into();
        let modules: IndexMap<String, ModuleDef> =
            modules.into_iter().map(|m| (m.name.clone(), m)).collect();
        if !modules.contains_key(&top) {
            return Err(IrError::MissingTop(top));
        }
        for module in modules.values() {
            validate::check_module(module, &modules)?;
        }
        let tree = InstanceTree::build(&top, &modules)?;
        let design = Self { top, modules, tree };
        validate::check_acyclic(&design)?;
        Ok(design)
    }

    pub fn top(&self) -> &str {
        &self.top
    }

    pub fn top_module(&self) -> &ModuleDef {
        &self.modules[&self.top]
    }

    pub fn module(&self, name: &str) -> Option<&ModuleDef> {
        self.modules.get(name)
    }

    pub fn modules(&self) -> impl Iterator<Item = &ModuleDef> {
        self.modules.values()
    }

    pub fn tree(&self) -> &InstanceTree {
        &self.tree
    }

    /// Module definition of the instance at `path`.
    pub fn module_at(&self, path: &InstancePath) -> Option<&ModuleDef> {
        self.tree.module_of(path).and_then(|m| self.modules.get(m))
    }

    pub fn into_modules(self) -> IndexMap<String, ModuleDef> {
        self.modules
    }

    /// Copy of the design restricted to modules reachable from the top.
    pub fn pruned(&self) -> Design {
        let used: std::collections::HashSet<&str> =
            self.tree.nodes().map(|n| n.module.as_str()).collect();
        let modules = self.modules.values().filter(|m| used.contains(m.name.as_str())).cloned();
        Design::new(self.top.clone(), modules).expect("pruning keeps a valid design valid")
    }

    /// Re-roots the design at another module definition.
    pub fn with_top(&self, top: &str) -> Result<Design> {
        Design::new(top, self.modules.values().cloned())
    }
}
