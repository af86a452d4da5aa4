// SPDX-License-Identifier: Apache-2.0
//! Bit-blasting elaboration of parsed modules into primitive gates.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use super::ast::*;
use super::lexer::Pos;
use crate::ir::{BitRef, Direction, Gate, GateKind, Instance, IrError, ModuleDef, Result};

#[derive(Debug, Clone)]
pub struct NetInfo {
    pub width: u32,
    msb: i64,
    lsb: i64,
    pub dir: Option<Direction>,
    is_reg: bool,
    typed: bool,
    pos: Pos,
}

impl NetInfo {
    /// Position (LSB first) of declared index `i`.
    fn offset(&self, i: i64) -> Option<u32> {
        let off = if self.msb >= self.lsb { i - self.lsb } else { self.lsb - i };
        (0..self.width as i64).contains(&off).then_some(off as u32)
    }
}

/// Port order and net table of a module, resolved before elaboration so
/// instantiations can be checked against their targets.
#[derive(Debug, Clone)]
pub struct Signature {
    pub ports: Vec<(String, Direction, u32)>,
    pub nets: IndexMap<String, NetInfo>,
}

fn syntax<T>(pos: Pos, msg: impl Into<String>) -> Result<T> {
    Err(IrError::Syntax { line: pos.line, col: pos.col, msg: msg.into() })
}

fn unsupported<T>(pos: Pos, what: impl Into<String>) -> Result<T> {
    Err(IrError::Unsupported { line: pos.line, col: pos.col, what: what.into() })
}

pub fn const_eval(e: &Expr) -> Result<i64> {
    match e {
        Expr::Number { bits, pos, .. } => {
            if bits.iter().skip(62).any(|&b| b) {
                return syntax(*pos, "constant too large");
            }
            Ok(bits.iter().take(62).enumerate().map(|(i, &b)| (b as i64) << i).sum())
        }
        Expr::Unary(UnOp::Neg, a, _) => Ok(-const_eval(a)?),
        Expr::Unary(UnOp::Plus, a, _) => const_eval(a),
        Expr::Binary(op, a, b, pos) => {
            let (x, y) = (const_eval(a)?, const_eval(b)?);
            match op {
                BinOp::Add => Ok(x + y),
                BinOp::Sub => Ok(x - y),
                BinOp::Shl if (0..62).contains(&y) => Ok(x << y),
                BinOp::Shr if (0..62).contains(&y) => Ok(x >> y),
                _ => unsupported(*pos, "operator in constant expression"),
            }
        }
        other => unsupported(other.pos(), "non-constant expression where a constant is required"),
    }
}

pub fn signature(ast: &ModuleAst) -> Result<Signature> {
    let mut nets: IndexMap<String, NetInfo> = IndexMap::new();
    for item in &ast.items {
        let Item::Decl(d) = item else { continue };
        let (msb, lsb) = match &d.range {
            Some((m, l)) => (const_eval(m)?, const_eval(l)?),
            None => (0, 0),
        };
        let width = (msb - lsb).unsigned_abs() + 1;
        if width > 1 << 20 {
            return syntax(d.pos, "declared range too wide");
        }
        let dir = match d.kind {
            DeclKind::Input => Some(Direction::Input),
            DeclKind::Output => Some(Direction::Output),
            _ => None,
        };
        let typed = matches!(d.kind, DeclKind::Wire | DeclKind::Reg) || d.is_reg;
        for (name, _, pos) in &d.names {
            match nets.get_mut(name) {
                None => {
                    nets.insert(
                        name.clone(),
                        NetInfo { width: width as u32, msb, lsb, dir, is_reg: d.is_reg, typed, pos: *pos },
                    );
                }
                Some(prev) => {
                    // `output q; reg q;` style completion of a port declaration
                    let mergeable = (prev.dir.is_some() && dir.is_none() && !prev.typed)
                        || (prev.dir.is_none() && dir.is_some() && !typed);
                    if !mergeable {
                        return syntax(*pos, format!("`{name}` declared twice"));
                    }
                    if d.range.is_some() && (prev.msb, prev.lsb) != (msb, lsb) && (prev.msb, prev.lsb) != (0, 0) {
                        return syntax(*pos, format!("conflicting ranges for `{name}`"));
                    }
                    if d.range.is_some() {
                        prev.msb = msb;
                        prev.lsb = lsb;
                        prev.width = width as u32;
                    }
                    prev.dir = prev.dir.or(dir);
                    prev.is_reg |= d.is_reg;
                    prev.typed |= typed;
                }
            }
        }
    }
    let mut ports = Vec::new();
    let mut seen = HashSet::new();
    for (name, pos) in &ast.header {
        if !seen.insert(name.clone()) {
            return syntax(*pos, format!("port `{name}` listed twice"));
        }
        match nets.get(name).and_then(|n| n.dir.map(|d| (d, n.width))) {
            Some((d, w)) => ports.push((name.clone(), d, w)),
            None => return syntax(*pos, format!("port `{name}` has no direction declaration")),
        }
    }
    for (name, info) in &nets {
        if info.dir.is_some() && !seen.contains(name) {
            return syntax(info.pos, format!("`{name}` declared as a port but missing from the port list"));
        }
    }
    Ok(Signature { ports, nets })
}

pub fn elaborate(ast: &ModuleAst, sigs: &HashMap<String, Signature>) -> Result<ModuleDef> {
    let sig = &sigs[&ast.name];
    let mut m = ModuleDef::new(&ast.name);
    m.blackbox = ast.blackbox;
    for (name, dir, width) in &sig.ports {
        m.add_port(name, *dir, *width);
    }
    for (name, info) in &sig.nets {
        if info.dir.is_none() {
            m.add_net(name, info.width);
        }
    }
    if ast.blackbox {
        if let Some(item) = ast.items.iter().find(|i| !matches!(i, Item::Decl(d) if d.names.iter().all(|n| n.1.is_none())))
        {
            let pos = match item {
                Item::Decl(d) => d.pos,
                Item::Assign { pos, .. } | Item::Inst { pos, .. } | Item::Always { pos, .. } => *pos,
            };
            return syntax(pos, format!("black-box module `{}` must have an empty body", ast.name));
        }
        return Ok(m);
    }
    let mut el = Elab {
        m,
        nets: &sig.nets,
        sigs,
        temps: HashSet::new(),
        consts: [None, None],
        clock: None,
    };
    for item in &ast.items {
        match item {
            Item::Decl(d) => {
                for (name, init, pos) in &d.names {
                    let Some(init) = init else { continue };
                    if d.kind == DeclKind::Reg {
                        if const_eval(init).ok() != Some(0) {
                            return unsupported(*pos, "non-zero register initializer");
                        }
                        continue;
                    }
                    let lhs = Expr::Ident(name.clone(), *pos);
                    el.assign(&lhs, init)?;
                }
            }
            Item::Assign { lhs, rhs, .. } => el.assign(lhs, rhs)?,
            Item::Inst { module, name, conns, pos } => el.instance(module, name, conns, *pos)?,
            Item::Always { clock, body, pos } => el.always(clock, body, *pos)?,
        }
    }
    el.prune_temps();
    Ok(el.m)
}

struct Elab<'a> {
    m: ModuleDef,
    nets: &'a IndexMap<String, NetInfo>,
    sigs: &'a HashMap<String, Signature>,
    temps: HashSet<String>,
    consts: [Option<BitRef>; 2],
    clock: Option<String>,
}

impl Elab<'_> {
    fn info(&self, name: &str, pos: Pos) -> Result<&NetInfo> {
        match self.nets.get(name) {
            Some(i) => Ok(i),
            None => syntax(pos, format!("undeclared identifier `{name}`")),
        }
    }

    fn temp(&mut self, width: u32) -> Vec<BitRef> {
        let name = self.m.fresh_net_name(&format!("_t{}", self.temps.len()));
        self.m.add_net(&name, width);
        self.temps.insert(name.clone());
        (0..width).map(|b| BitRef::new(name.as_str(), b)).collect()
    }

    fn konst(&mut self, v: bool) -> BitRef {
        if let Some(b) = &self.consts[v as usize] {
            return b.clone();
        }
        let name = self.m.fresh_net_name(if v { "_c1" } else { "_c0" });
        self.m.add_net(&name, 1);
        let bit = BitRef::new(name, 0);
        let kind = if v { GateKind::Const1 } else { GateKind::Const0 };
        self.m.gates.push(Gate::new(kind, vec![], bit.clone()));
        self.consts[v as usize] = Some(bit.clone());
        bit
    }

    fn is_const_bit(&self, b: &BitRef) -> Option<bool> {
        (0..2).find(|&v| self.consts[v].as_ref() == Some(b)).map(|v| v == 1)
    }

    fn gate(&mut self, kind: GateKind, inputs: Vec<BitRef>) -> BitRef {
        let out = self.temp(1).pop().unwrap();
        self.m.gates.push(Gate::new(kind, inputs, out.clone()));
        out
    }

    fn fit(&mut self, mut bits: Vec<BitRef>, width: u32) -> Vec<BitRef> {
        let w = width as usize;
        if bits.len() > w {
            bits.truncate(w);
        }
        while bits.len() < w {
            bits.push(self.konst(false));
        }
        bits
    }

    fn self_width(&self, e: &Expr) -> Result<u32> {
        Ok(match e {
            Expr::Ident(n, p) => self.info(n, *p)?.width,
            Expr::Number { bits, width, .. } => width.unwrap_or(bits.len() as u32),
            Expr::Index(..) => 1,
            Expr::Slice(_, a, b, _) => ((const_eval(a)? - const_eval(b)?).unsigned_abs() + 1) as u32,
            Expr::Unary(op, a, _) => match op {
                UnOp::Not | UnOp::Neg | UnOp::Plus => self.self_width(a)?,
                _ => 1,
            },
            Expr::Binary(op, a, b, _) => match op {
                BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Xnor | BinOp::Add | BinOp::Sub => {
                    self.self_width(a)?.max(self.self_width(b)?)
                }
                BinOp::Shl | BinOp::Shr => self.self_width(a)?,
                _ => 1,
            },
            Expr::Ternary(_, a, b, _) => self.self_width(a)?.max(self.self_width(b)?),
            Expr::Concat(items, _) => items.iter().map(|i| self.self_width(i)).sum::<Result<u32>>()?,
            Expr::Repeat(n, items, pos) => {
                let count = const_eval(n)?;
                if count < 1 {
                    return syntax(*pos, "replication count must be positive");
                }
                count as u32 * items.iter().map(|i| self.self_width(i)).sum::<Result<u32>>()?
            }
        })
    }

    /// Value of `e` in a context of `width` bits.
    fn value(&mut self, e: &Expr, width: u32) -> Result<Vec<BitRef>> {
        let w = width.max(self.self_width(e)?);
        let bits = self.ev(e, w)?;
        Ok(self.fit(bits, width))
    }

    fn self_value(&mut self, e: &Expr) -> Result<Vec<BitRef>> {
        let w = self.self_width(e)?;
        self.ev(e, w)
    }

    /// Single-bit truth value of `e` (non-zero test).
    fn truth(&mut self, e: &Expr) -> Result<BitRef> {
        let bits = self.self_value(e)?;
        Ok(self.reduce(GateKind::Or, bits, false))
    }

    fn reduce(&mut self, kind: GateKind, mut bits: Vec<BitRef>, invert: bool) -> BitRef {
        if bits.len() == 1 {
            let b = bits.pop().unwrap();
            return if invert { self.gate(GateKind::Not, vec![b]) } else { b };
        }
        while bits.len() > 2 {
            let mut next = Vec::with_capacity(bits.len().div_ceil(2));
            let mut it = bits.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(self.gate(kind, vec![a, b])),
                    None => next.push(a),
                }
            }
            bits = next;
        }
        let k = if invert { inverted(kind) } else { kind };
        self.gate(k, bits)
    }

    fn bitwise(&mut self, kind: GateKind, a: &[BitRef], b: &[BitRef]) -> Vec<BitRef> {
        let out = self.temp(a.len() as u32);
        for i in 0..a.len() {
            self.m.gates.push(Gate::new(kind, vec![a[i].clone(), b[i].clone()], out[i].clone()));
        }
        out
    }

    /// Ripple-carry `a + b` or `a - b` (as `a + ~b + 1`).
    fn add(&mut self, a: &[BitRef], b: &[BitRef], sub: bool) -> Vec<BitRef> {
        let n = a.len();
        let b: Vec<BitRef> = if sub {
            let nb = self.temp(n as u32);
            for i in 0..n {
                self.m.gates.push(Gate::new(GateKind::Not, vec![b[i].clone()], nb[i].clone()));
            }
            nb
        } else {
            b.to_vec()
        };
        let sum = self.temp(n as u32);
        let mut carry: Option<BitRef> = None;
        for i in 0..n {
            let last = i + 1 == n;
            match carry.take() {
                None if !sub => {
                    self.m.gates.push(Gate::new(GateKind::Xor, vec![a[i].clone(), b[i].clone()], sum[i].clone()));
                    if !last {
                        carry = Some(self.gate(GateKind::And, vec![a[i].clone(), b[i].clone()]));
                    }
                }
                None => {
                    // carry-in of 1
                    self.m.gates.push(Gate::new(GateKind::Xnor, vec![a[i].clone(), b[i].clone()], sum[i].clone()));
                    if !last {
                        carry = Some(self.gate(GateKind::Or, vec![a[i].clone(), b[i].clone()]));
                    }
                }
                Some(c) => {
                    let x = self.gate(GateKind::Xor, vec![a[i].clone(), b[i].clone()]);
                    self.m.gates.push(Gate::new(GateKind::Xor, vec![x.clone(), c.clone()], sum[i].clone()));
                    if !last {
                        let g = self.gate(GateKind::And, vec![a[i].clone(), b[i].clone()]);
                        let p = self.gate(GateKind::And, vec![x, c]);
                        carry = Some(self.gate(GateKind::Or, vec![g, p]));
                    }
                }
            }
        }
        sum
    }

    /// Unsigned `a < b`.
    fn less(&mut self, a: &[BitRef], b: &[BitRef]) -> BitRef {
        let mut lt: Option<BitRef> = None;
        for i in 0..a.len() {
            let na = self.gate(GateKind::Not, vec![a[i].clone()]);
            let here = self.gate(GateKind::And, vec![na, b[i].clone()]);
            lt = Some(match lt {
                None => here,
                Some(prev) => {
                    let same = self.gate(GateKind::Xnor, vec![a[i].clone(), b[i].clone()]);
                    let keep = self.gate(GateKind::And, vec![same, prev]);
                    self.gate(GateKind::Or, vec![here, keep])
                }
            });
        }
        lt.expect("comparison operands are at least one bit")
    }

    fn ev(&mut self, e: &Expr, w: u32) -> Result<Vec<BitRef>> {
        match e {
            Expr::Ident(name, pos) => {
                let width = self.info(name, *pos)?.width;
                let bits = (0..width).map(|b| BitRef::new(name.as_str(), b)).collect();
                Ok(self.fit(bits, w))
            }
            Expr::Number { bits, width, .. } => {
                let n = width.unwrap_or(bits.len() as u32) as usize;
                let lits: Vec<BitRef> = (0..n).map(|i| self.konst(bits.get(i).copied().unwrap_or(false))).collect();
                Ok(self.fit(lits, w))
            }
            Expr::Index(..) | Expr::Slice(..) => {
                let bits = self.select(e)?;
                Ok(self.fit(bits, w))
            }
            Expr::Unary(op, a, pos) => match op {
                UnOp::Plus => self.ev(a, w),
                UnOp::Not => {
                    if let Expr::Binary(bop @ (BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Xnor), x, y, _) = &**a {
                        let x = self.ev(x, w)?;
                        let y = self.ev(y, w)?;
                        let kind = match bop {
                            BinOp::And => GateKind::Nand,
                            BinOp::Or => GateKind::Nor,
                            BinOp::Xor => GateKind::Xnor,
                            _ => GateKind::Xor,
                        };
                        return Ok(self.bitwise(kind, &x, &y));
                    }
                    let x = self.ev(a, w)?;
                    let out = self.temp(w);
                    for (i, b) in x.into_iter().enumerate() {
                        self.m.gates.push(Gate::new(GateKind::Not, vec![b], out[i].clone()));
                    }
                    Ok(out)
                }
                UnOp::Neg => {
                    let x = self.ev(a, w)?;
                    let zero: Vec<BitRef> = (0..w).map(|_| self.konst(false)).collect();
                    Ok(self.add(&zero, &x, true))
                }
                UnOp::LogNot => {
                    let bits = self.self_value(a)?;
                    let r = self.reduce(GateKind::Or, bits, true);
                    Ok(self.fit(vec![r], w))
                }
                _ => {
                    let bits = self.self_value(a)?;
                    let (kind, invert) = match op {
                        UnOp::RedAnd => (GateKind::And, false),
                        UnOp::RedOr => (GateKind::Or, false),
                        UnOp::RedXor => (GateKind::Xor, false),
                        UnOp::RedNand => (GateKind::And, true),
                        UnOp::RedNor => (GateKind::Or, true),
                        UnOp::RedXnor => (GateKind::Xor, true),
                        _ => return unsupported(*pos, "unary operator"),
                    };
                    let r = self.reduce(kind, bits, invert);
                    Ok(self.fit(vec![r], w))
                }
            },
            Expr::Binary(op, a, b, pos) => {
                let r = match op {
                    BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Xnor => {
                        let x = self.ev(a, w)?;
                        let y = self.ev(b, w)?;
                        let kind = match op {
                            BinOp::And => GateKind::And,
                            BinOp::Or => GateKind::Or,
                            BinOp::Xor => GateKind::Xor,
                            _ => GateKind::Xnor,
                        };
                        return Ok(self.bitwise(kind, &x, &y));
                    }
                    BinOp::Add | BinOp::Sub => {
                        let x = self.ev(a, w)?;
                        let y = self.ev(b, w)?;
                        return Ok(self.add(&x, &y, *op == BinOp::Sub));
                    }
                    BinOp::Shl | BinOp::Shr => {
                        let n = match const_eval(b) {
                            Ok(n) if n >= 0 => n as usize,
                            Ok(_) => return syntax(*pos, "negative shift amount"),
                            Err(_) => return unsupported(*pos, "shift by a non-constant amount"),
                        };
                        let x = self.ev(a, w)?;
                        let n = n.min(w as usize);
                        let mut out = Vec::with_capacity(w as usize);
                        if *op == BinOp::Shl {
                            for _ in 0..n {
                                out.push(self.konst(false));
                            }
                            out.extend(x[..w as usize - n].iter().cloned());
                        } else {
                            out.extend(x[n..].iter().cloned());
                            while out.len() < w as usize {
                                out.push(self.konst(false));
                            }
                        }
                        return Ok(out);
                    }
                    BinOp::LogAnd | BinOp::LogOr => {
                        let x = self.truth(a)?;
                        let y = self.truth(b)?;
                        let kind = if *op == BinOp::LogAnd { GateKind::And } else { GateKind::Or };
                        self.gate(kind, vec![x, y])
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ow = self.self_width(a)?.max(self.self_width(b)?);
                        let x = self.value(a, ow)?;
                        let y = self.value(b, ow)?;
                        if *op == BinOp::Eq {
                            let same = self.bitwise(GateKind::Xnor, &x, &y);
                            self.reduce(GateKind::And, same, false)
                        } else {
                            let diff = self.bitwise(GateKind::Xor, &x, &y);
                            self.reduce(GateKind::Or, diff, false)
                        }
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let ow = self.self_width(a)?.max(self.self_width(b)?);
                        let x = self.value(a, ow)?;
                        let y = self.value(b, ow)?;
                        match op {
                            BinOp::Lt => self.less(&x, &y),
                            BinOp::Gt => self.less(&y, &x),
                            BinOp::Le => {
                                let gt = self.less(&y, &x);
                                self.gate(GateKind::Not, vec![gt])
                            }
                            _ => {
                                let lt = self.less(&x, &y);
                                self.gate(GateKind::Not, vec![lt])
                            }
                        }
                    }
                };
                Ok(self.fit(vec![r], w))
            }
            Expr::Ternary(c, a, b, _) => {
                let s = self.truth(c)?;
                let x = self.ev(a, w)?;
                let y = self.ev(b, w)?;
                let out = self.temp(w);
                for i in 0..w as usize {
                    self.m.gates.push(Gate::new(
                        GateKind::Mux2,
                        vec![s.clone(), x[i].clone(), y[i].clone()],
                        out[i].clone(),
                    ));
                }
                Ok(out)
            }
            Expr::Concat(items, _) => {
                let mut bits = Vec::new();
                for item in items.iter().rev() {
                    bits.extend(self.self_value(item)?);
                }
                Ok(self.fit(bits, w))
            }
            Expr::Repeat(n, items, _) => {
                let count = const_eval(n)? as usize;
                let mut once = Vec::new();
                for item in items.iter().rev() {
                    once.extend(self.self_value(item)?);
                }
                let bits: Vec<BitRef> = (0..count).flat_map(|_| once.iter().cloned()).collect();
                Ok(self.fit(bits, w))
            }
        }
    }

    /// Bits named by an identifier, bit-select or constant part-select.
    fn select(&self, e: &Expr) -> Result<Vec<BitRef>> {
        match e {
            Expr::Ident(name, pos) => {
                let info = self.info(name, *pos)?;
                Ok((0..info.width).map(|b| BitRef::new(name.as_str(), b)).collect())
            }
            Expr::Index(name, idx, pos) => {
                let info = self.info(name, *pos)?;
                let i = match const_eval(idx) {
                    Ok(i) => i,
                    Err(_) => return unsupported(*pos, "bit-select with a non-constant index"),
                };
                match info.offset(i) {
                    Some(o) => Ok(vec![BitRef::new(name.as_str(), o)]),
                    None => syntax(*pos, format!("bit-select `{name}[{i}]` out of range")),
                }
            }
            Expr::Slice(name, hi, lo, pos) => {
                let info = self.info(name, *pos)?;
                let (h, l) = (const_eval(hi)?, const_eval(lo)?);
                if (h >= l) != (info.msb >= info.lsb) && h != l {
                    return syntax(*pos, format!("part-select of `{name}` reverses the declared range"));
                }
                let (Some(a), Some(b)) = (info.offset(h), info.offset(l)) else {
                    return syntax(*pos, format!("part-select `{name}[{h}:{l}]` out of range"));
                };
                Ok((b.min(a)..=a.max(b)).map(|o| BitRef::new(name.as_str(), o)).collect())
            }
            other => syntax(other.pos(), "invalid assignment target"),
        }
    }

    fn lvalue(&self, e: &Expr) -> Result<Vec<BitRef>> {
        match e {
            Expr::Concat(items, _) => {
                let mut bits = Vec::new();
                for item in items.iter().rev() {
                    bits.extend(self.lvalue(item)?);
                }
                Ok(bits)
            }
            _ => self.select(e),
        }
    }

    /// Continuous assignment. The gates computing the right-hand side drive
    /// the targets directly where possible; plain copies become `BUF`s.
    fn assign(&mut self, lhs: &Expr, rhs: &Expr) -> Result<()> {
        let targets = self.lvalue(lhs)?;
        let start = self.m.gates.len();
        let srcs = self.value(rhs, targets.len() as u32)?;
        self.connect(targets, srcs, start);
        Ok(())
    }

    fn connect(&mut self, targets: Vec<BitRef>, srcs: Vec<BitRef>, start: usize) {
        let mut moved: HashMap<BitRef, BitRef> = HashMap::new();
        for (t, s) in targets.into_iter().zip(srcs) {
            if let Some(prev) = moved.get(&s) {
                let prev = prev.clone();
                let gate = match self.is_const_bit(&prev) {
                    Some(v) => Gate::new(if v { GateKind::Const1 } else { GateKind::Const0 }, vec![], t),
                    None => Gate::new(GateKind::Buf, vec![prev], t),
                };
                self.m.gates.push(gate);
                continue;
            }
            if self.temps.contains(&s.net) {
                if let Some(g) = self.m.gates[start..].iter().position(|g| g.output == s) {
                    self.m.gates[start + g].output = t.clone();
                    for gate in &mut self.m.gates[start..] {
                        for i in &mut gate.inputs {
                            if *i == s {
                                *i = t.clone();
                            }
                        }
                    }
                    moved.insert(s, t);
                    continue;
                }
            }
            match self.is_const_bit(&s) {
                // a constant first made by this statement drives the target itself
                Some(v) if self.m.gates[start..].iter().any(|g| g.output == s) => {
                    for gate in &mut self.m.gates[start..] {
                        if gate.output == s {
                            gate.output = t.clone();
                        }
                        for i in &mut gate.inputs {
                            if *i == s {
                                *i = t.clone();
                            }
                        }
                    }
                    self.m.nets.shift_remove(&s.net);
                    self.consts[v as usize] = Some(t.clone());
                    moved.insert(s, t);
                }
                Some(v) => {
                    let kind = if v { GateKind::Const1 } else { GateKind::Const0 };
                    self.m.gates.push(Gate::new(kind, vec![], t));
                }
                None => self.m.gates.push(Gate::new(GateKind::Buf, vec![s], t)),
            }
        }
    }

    fn instance(&mut self, module: &str, name: &str, conns: &Conns, pos: Pos) -> Result<()> {
        let Some(child) = self.sigs.get(module) else {
            return Err(IrError::UnresolvedModule { module: self.m.name.clone(), target: module.to_string() });
        };
        let ports = child.ports.clone();
        let mut pairs: Vec<(usize, &Expr, Pos)> = Vec::new();
        match conns {
            Conns::Named(list) => {
                let mut seen = HashSet::new();
                for (port, e, p) in list {
                    let Some(idx) = ports.iter().position(|(n, _, _)| n == port) else {
                        return syntax(*p, format!("module `{module}` has no port `{port}`"));
                    };
                    if !seen.insert(idx) {
                        return syntax(*p, format!("port `{port}` connected twice"));
                    }
                    if let Some(e) = e {
                        pairs.push((idx, e, *p));
                    }
                }
            }
            Conns::Positional(list) => {
                if list.len() > ports.len() {
                    return syntax(pos, format!("too many connections for module `{module}`"));
                }
                for (idx, e) in list.iter().enumerate() {
                    if let Some(e) = e {
                        pairs.push((idx, e, e.pos()));
                    }
                }
            }
        }
        let mut connections = IndexMap::new();
        pairs.sort_by_key(|(i, _, _)| *i);
        for (idx, e, p) in pairs {
            let (port, dir, width) = &ports[idx];
            let bits = match dir {
                Direction::Input => self.value(e, *width)?,
                Direction::Output => {
                    let bits = self.lvalue(e).map_err(|_| IrError::Syntax {
                        line: p.line,
                        col: p.col,
                        msg: format!("output port `{port}` must connect to a net"),
                    })?;
                    if bits.len() != *width as usize {
                        return Err(IrError::WidthMismatch(format!(
                            "{}:{}: output `{port}` of `{module}` is {width} bits, connected to {}",
                            p.line,
                            p.col,
                            bits.len()
                        )));
                    }
                    bits
                }
            };
            connections.insert(port.clone(), bits);
        }
        // keep the child's port order
        let connections = ports
            .iter()
            .filter_map(|(p, _, _)| connections.get(p).map(|b: &Vec<BitRef>| (p.clone(), b.clone())))
            .collect();
        self.m.instances.push(Instance { name: name.to_string(), module: module.to_string(), connections });
        Ok(())
    }

    fn always(&mut self, clock: &str, body: &Stmt, pos: Pos) -> Result<()> {
        match &self.clock {
            Some(c) if c != clock => return unsupported(pos, "multiple clocks"),
            _ => self.clock = Some(clock.to_string()),
        }
        match self.nets.get(clock) {
            Some(i) if i.dir == Some(Direction::Input) && i.width == 1 => {}
            _ => return syntax(pos, format!("clock `{clock}` must be a 1-bit input port")),
        }
        self.m.clock = Some(clock.to_string());
        let mut next: IndexMap<BitRef, BitRef> = IndexMap::new();
        self.exec(body, &mut next)?;
        for (q, d) in next {
            self.m.gates.push(Gate::new(GateKind::Dff, vec![d], q));
        }
        Ok(())
    }

    fn exec(&mut self, s: &Stmt, next: &mut IndexMap<BitRef, BitRef>) -> Result<()> {
        match s {
            Stmt::Empty => Ok(()),
            Stmt::Block(items) => items.iter().try_for_each(|i| self.exec(i, next)),
            Stmt::Assign(lhs, rhs) => {
                let targets = self.lvalue(lhs)?;
                let vals = self.value(rhs, targets.len() as u32)?;
                for (t, v) in targets.into_iter().zip(vals) {
                    next.insert(t, v);
                }
                Ok(())
            }
            Stmt::If(cond, then, other) => {
                let c = self.truth(cond)?;
                let mut a = next.clone();
                self.exec(then, &mut a)?;
                let mut b = next.clone();
                if let Some(o) = other {
                    self.exec(o, &mut b)?;
                }
                let keys: Vec<BitRef> = a.keys().chain(b.keys()).cloned().collect();
                for k in keys {
                    if next.get(&k).is_some() && a.get(&k) == next.get(&k) && b.get(&k) == next.get(&k) {
                        continue;
                    }
                    let x = a.get(&k).cloned().unwrap_or_else(|| k.clone());
                    let y = b.get(&k).cloned().unwrap_or_else(|| k.clone());
                    let v = if x == y { x } else { self.gate(GateKind::Mux2, vec![c.clone(), x, y]) };
                    next.insert(k, v);
                }
                Ok(())
            }
        }
    }

    /// Drops temporaries whose bits were all moved onto assignment targets.
    fn prune_temps(&mut self) {
        let mut used: HashSet<&str> = HashSet::new();
        for g in &self.m.gates {
            used.insert(g.output.net.as_str());
            for i in &g.inputs {
                used.insert(i.net.as_str());
            }
        }
        for inst in &self.m.instances {
            for bits in inst.connections.values() {
                for b in bits {
                    used.insert(b.net.as_str());
                }
            }
        }
        let dead: Vec<String> =
            self.temps.iter().filter(|t| !used.contains(t.as_str())).cloned().collect();
        for t in dead {
            self.m.nets.shift_remove(&t);
        }
    }
}

fn inverted(kind: GateKind) -> GateKind {
    match kind {
        GateKind::And => GateKind::Nand,
        GateKind::Or => GateKind::Nor,
        GateKind::Xor => GateKind::Xnor,
        other => other,
    }
}
