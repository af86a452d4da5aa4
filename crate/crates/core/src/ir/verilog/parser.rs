// SPDX-License-Identifier: Apache-2.0
use super::ast::*;
use super::lexer::{Pos, Tok, Token};
use crate::ir::{IrError, Result};

const UNSUPPORTED_ITEMS: &[&str] = &[
    "parameter",
    "localparam",
    "defparam",
    "generate",
    "genvar",
    "function",
    "task",
    "initial",
    "integer",
    "real",
    "time",
    "event",
    "specify",
    "tri",
    "supply0",
    "supply1",
    "wand",
    "wor",
    "for",
    "inout",
];

pub struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    pub fn new(toks: Vec<Token>) -> Self {
        Self { toks, at: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let p = self.pos();
        Err(IrError::Syntax { line: p.line, col: p.col, msg: msg.into() })
    }

    fn unsupported<T>(pos: Pos, what: impl Into<String>) -> Result<T> {
        Err(IrError::Unsupported { line: pos.line, col: pos.col, what: what.into() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok((s, pos))
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    pub fn source(&mut self) -> Result<Vec<ModuleAst>> {
        let mut modules = Vec::new();
        loop {
            let mut blackbox = false;
            while let Tok::Attr(a) = self.peek().clone() {
                blackbox |= a.split(|c: char| c == ',' || c.is_whitespace()).any(|w| w == "blackbox");
                self.bump();
            }
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(k) if k == "module" => {
                    let m = self.module(blackbox)?;
                    modules.push(m);
                }
                Tok::Ident(k) if k == "macromodule" || k == "primitive" || k == "config" => {
                    return Self::unsupported(self.pos(), k.clone());
                }
                other => return self.err(format!("expected `module`, found {}", describe(other))),
            }
        }
        Ok(modules)
    }

    fn module(&mut self, blackbox: bool) -> Result<ModuleAst> {
        let pos = self.pos();
        self.expect_kw("module")?;
        let (name, _) = self.ident()?;
        if self.is_sym("#") {
            return Self::unsupported(self.pos(), "module parameters");
        }
        let mut header = Vec::new();
        let mut items = Vec::new();
        if self.eat_sym("(") {
            if !self.is_sym(")") {
                if self.is_kw("input") || self.is_kw("output") || self.is_kw("inout") {
                    loop {
                        let decl = self.port_decl_head()?;
                        let mut decl = decl;
                        loop {
                            let (n, p) = self.ident()?;
                            header.push((n.clone(), p));
                            decl.names.push((n, None, p));
                            if !self.is_sym(",") {
                                break;
                            }
                            if matches!(self.peek_at(1), Tok::Ident(k) if k == "input" || k == "output" || k == "inout")
                            {
                                break;
                            }
                            self.bump();
                        }
                        items.push(Item::Decl(decl));
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                } else {
                    loop {
                        header.push(self.ident()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_sym(")")?;
        }
        self.expect_sym(";")?;
        while !self.eat_kw("endmodule") {
            if matches!(self.peek(), Tok::Eof) {
                return self.err("missing `endmodule`");
            }
            self.item(&mut items)?;
        }
        Ok(ModuleAst { name, pos, blackbox, header, items })
    }

    /// `input|output [wire|reg] [range]`
    fn port_decl_head(&mut self) -> Result<Decl> {
        let pos = self.pos();
        let kind = if self.eat_kw("input") {
            DeclKind::Input
        } else if self.eat_kw("output") {
            DeclKind::Output
        } else if self.is_kw("inout") {
            return Self::unsupported(pos, "inout port");
        } else {
            return self.err("expected port direction");
        };
        let mut is_reg = false;
        if self.eat_kw("reg") {
            is_reg = true;
        } else {
            self.eat_kw("wire");
        }
        if self.is_kw("signed") {
            return Self::unsupported(self.pos(), "signed declaration");
        }
        let range = self.opt_range()?;
        Ok(Decl { kind, is_reg, range, names: Vec::new(), pos })
    }

    fn opt_range(&mut self) -> Result<Option<(Expr, Expr)>> {
        if !self.eat_sym("[") {
            return Ok(None);
        }
        let msb = self.expr()?;
        self.expect_sym(":")?;
        let lsb = self.expr()?;
        self.expect_sym("]")?;
        Ok(Some((msb, lsb)))
    }

    fn item(&mut self, items: &mut Vec<Item>) -> Result<()> {
        while let Tok::Attr(_) = self.peek() {
            self.bump();
        }
        let pos = self.pos();
        let word = match self.peek().clone() {
            Tok::Ident(w) => w,
            other => return self.err(format!("expected module item, found {}", describe(&other))),
        };
        if UNSUPPORTED_ITEMS.contains(&word.as_str()) {
            let what = if word == "inout" { "inout port".to_string() } else { format!("`{word}`") };
            return Self::unsupported(pos, what);
        }
        match word.as_str() {
            "input" | "output" => {
                let mut decl = self.port_decl_head()?;
                self.decl_names(&mut decl, false)?;
                items.push(Item::Decl(decl));
            }
            "wire" | "reg" => {
                self.bump();
                if self.is_kw("signed") {
                    return Self::unsupported(self.pos(), "signed declaration");
                }
                let kind = if word == "reg" { DeclKind::Reg } else { DeclKind::Wire };
                let range = self.opt_range()?;
                let mut decl = Decl { kind, is_reg: kind == DeclKind::Reg, range, names: Vec::new(), pos };
                self.decl_names(&mut decl, true)?;
                items.push(Item::Decl(decl));
            }
            "assign" => {
                self.bump();
                if self.is_sym("#") {
                    return Self::unsupported(self.pos(), "delay");
                }
                loop {
                    let p = self.pos();
                    let lhs = self.expr()?;
                    self.expect_sym("=")?;
                    let rhs = self.expr()?;
                    items.push(Item::Assign { lhs, rhs, pos: p });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
            "always" | "always_ff" => {
                self.bump();
                let clock = self.sensitivity()?;
                let body = self.stmt()?;
                items.push(Item::Always { clock, body, pos });
            }
            "always_comb" | "always_latch" => return Self::unsupported(pos, format!("`{word}`")),
            _ if is_keyword(&word) => return self.err(format!("unexpected keyword `{word}`")),
            _ => {
                let (module, _) = self.ident()?;
                if self.is_sym("#") {
                    return Self::unsupported(self.pos(), "parameter override");
                }
                loop {
                    let p = self.pos();
                    let (name, _) = self.ident()?;
                    if self.is_sym("[") {
                        return Self::unsupported(self.pos(), "instance array");
                    }
                    self.expect_sym("(")?;
                    let conns = self.connections()?;
                    self.expect_sym(")")?;
                    items.push(Item::Inst { module: module.clone(), name, conns, pos: p });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            }
        }
        Ok(())
    }

    fn decl_names(&mut self, decl: &mut Decl, allow_init: bool) -> Result<()> {
        loop {
            let (n, p) = self.ident()?;
            if self.is_sym("[") {
                return Self::unsupported(self.pos(), "memory array");
            }
            let init = if self.eat_sym("=") {
                if !allow_init {
                    return self.err("initializer not allowed here");
                }
                Some(self.expr()?)
            } else {
                None
            };
            decl.names.push((n, init, p));
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")
    }

    fn sensitivity(&mut self) -> Result<String> {
        let pos = self.pos();
        self.expect_sym("@")?;
        if self.is_sym("*") {
            return Self::unsupported(pos, "combinational always block");
        }
        self.expect_sym("(")?;
        if self.is_sym("*") {
            return Self::unsupported(pos, "combinational always block");
        }
        if self.is_kw("negedge") {
            return Self::unsupported(self.pos(), "negedge clocking");
        }
        if !self.eat_kw("posedge") {
            return Self::unsupported(pos, "combinational always block");
        }
        let (clock, _) = self.ident()?;
        if self.is_kw("or") || self.is_sym(",") {
            return Self::unsupported(self.pos(), "asynchronous reset or multi-edge sensitivity");
        }
        self.expect_sym(")")?;
        Ok(clock)
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let pos = self.pos();
        if self.eat_sym(";") {
            return Ok(Stmt::Empty);
        }
        if self.eat_kw("begin") {
            if self.eat_sym(":") {
                self.ident()?;
            }
            let mut body = Vec::new();
            while !self.eat_kw("end") {
                if matches!(self.peek(), Tok::Eof) {
                    return self.err("missing `end`");
                }
                body.push(self.stmt()?);
            }
            return Ok(Stmt::Block(body));
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then = self.stmt()?;
            let other = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
            return Ok(Stmt::If(cond, Box::new(then), other));
        }
        if self.is_kw("casez") || self.is_kw("casex") {
            return Self::unsupported(pos, "casez/casex");
        }
        if self.eat_kw("case") {
            return self.case(pos);
        }
        if let Tok::Ident(w) = self.peek() {
            if is_keyword(w) {
                return Self::unsupported(pos, format!("`{w}` statement"));
            }
        }
        // a full expression would swallow `<=` as a comparison
        let lhs = self.primary()?;
        if self.is_sym("=") {
            return Self::unsupported(self.pos(), "blocking assignment in always block");
        }
        self.expect_sym("<=")?;
        if self.is_sym("#") {
            return Self::unsupported(self.pos(), "delay");
        }
        let rhs = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign(lhs, rhs))
    }

    /// Lowered to an if/else chain in item order.
    fn case(&mut self, pos: Pos) -> Result<Stmt> {
        self.expect_sym("(")?;
        let sel = self.expr()?;
        self.expect_sym(")")?;
        let mut arms: Vec<(Vec<Expr>, Stmt)> = Vec::new();
        let mut default = None;
        while !self.eat_kw("endcase") {
            if matches!(self.peek(), Tok::Eof) {
                return self.err("missing `endcase`");
            }
            if self.eat_kw("default") {
                self.eat_sym(":");
                default = Some(self.stmt()?);
                continue;
            }
            let mut labels = vec![self.expr()?];
            while self.eat_sym(",") {
                labels.push(self.expr()?);
            }
            self.expect_sym(":")?;
            arms.push((labels, self.stmt()?));
        }
        let mut chain = default;
        for (labels, body) in arms.into_iter().rev() {
            let cond = labels
                .into_iter()
                .map(|l| Expr::Binary(BinOp::Eq, Box::new(sel.clone()), Box::new(l), pos))
                .reduce(|a, b| Expr::Binary(BinOp::LogOr, Box::new(a), Box::new(b), pos))
                .expect("at least one label");
            chain = Some(Stmt::If(cond, Box::new(body), chain.map(Box::new)));
        }
        Ok(chain.unwrap_or(Stmt::Empty))
    }

    fn connections(&mut self) -> Result<Conns> {
        if self.is_sym(")") {
            return Ok(Conns::Positional(Vec::new()));
        }
        if self.is_sym(".") {
            let mut named = Vec::new();
            loop {
                let p = self.pos();
                self.expect_sym(".")?;
                if self.is_sym("*") {
                    return Self::unsupported(p, "wildcard connection");
                }
                let (port, _) = self.ident()?;
                self.expect_sym("(")?;
                let e = if self.is_sym(")") { None } else { Some(self.expr()?) };
                self.expect_sym(")")?;
                named.push((port, e, p));
                if !self.eat_sym(",") {
                    break;
                }
            }
            Ok(Conns::Named(named))
        } else {
            let mut list = Vec::new();
            loop {
                if self.is_sym(",") || self.is_sym(")") {
                    list.push(None);
                } else {
                    list.push(Some(self.expr()?));
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            Ok(Conns::Positional(list))
        }
    }

    pub fn expr(&mut self) -> Result<Expr> {
        let cond = self.binary(0)?;
        if self.is_sym("?") {
            let pos = self.pos();
            self.bump();
            let a = self.expr()?;
            self.expect_sym(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b), pos));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Sym(s) => match binop(s) {
                    Some(x) => x,
                    None => {
                        if matches!(*s, "*" | "/" | "%" | "**" | "===" | "!==") {
                            return Self::unsupported(self.pos(), format!("operator `{s}`"));
                        }
                        break;
                    }
                },
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            let pos = self.pos();
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs), pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        let op = match self.peek() {
            Tok::Sym("~") => Some(UnOp::Not),
            Tok::Sym("!") => Some(UnOp::LogNot),
            Tok::Sym("-") => Some(UnOp::Neg),
            Tok::Sym("+") => Some(UnOp::Plus),
            Tok::Sym("&") => Some(UnOp::RedAnd),
            Tok::Sym("|") => Some(UnOp::RedOr),
            Tok::Sym("^") => Some(UnOp::RedXor),
            Tok::Sym("~&") => Some(UnOp::RedNand),
            Tok::Sym("~|") => Some(UnOp::RedNor),
            Tok::Sym("~^") | Tok::Sym("^~") => Some(UnOp::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Unary(op, Box::new(e), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number { bits, width } => {
                self.bump();
                Ok(Expr::Number { bits, width, pos })
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => {
                self.bump();
                let first = self.expr()?;
                if self.is_sym("{") {
                    self.bump();
                    let mut items = vec![self.expr()?];
                    while self.eat_sym(",") {
                        items.push(self.expr()?);
                    }
                    self.expect_sym("}")?;
                    self.expect_sym("}")?;
                    return Ok(Expr::Repeat(Box::new(first), items, pos));
                }
                let mut items = vec![first];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym("}")?;
                Ok(Expr::Concat(items, pos))
            }
            Tok::Ident(name) if !is_keyword(&name) => {
                self.bump();
                if self.is_sym("(") {
                    return Self::unsupported(pos, "function call");
                }
                if self.eat_sym("[") {
                    let a = self.expr()?;
                    if self.is_sym("+:") || self.is_sym("-:") {
                        return Self::unsupported(self.pos(), "indexed part-select");
                    }
                    if self.eat_sym(":") {
                        let b = self.expr()?;
                        self.expect_sym("]")?;
                        return Ok(Expr::Slice(name, Box::new(a), Box::new(b), pos));
                    }
                    self.expect_sym("]")?;
                    if self.is_sym("[") {
                        return Self::unsupported(self.pos(), "multi-dimensional select");
                    }
                    return Ok(Expr::Index(name, Box::new(a), pos));
                }
                Ok(Expr::Ident(name, pos))
            }
            other => self.err(format!("expected expression, found {}", describe(&other))),
        }
    }
}

fn binop(s: &str) -> Option<(BinOp, u8)> {
    Some(match s {
        "||" => (BinOp::LogOr, 1),
        "&&" => (BinOp::LogAnd, 2),
        "|" => (BinOp::Or, 3),
        "^" => (BinOp::Xor, 4),
        "~^" | "^~" => (BinOp::Xnor, 4),
        "&" => (BinOp::And, 5),
        "==" => (BinOp::Eq, 6),
        "!=" => (BinOp::Ne, 6),
        "<" => (BinOp::Lt, 7),
        "<=" => (BinOp::Le, 7),
        ">" => (BinOp::Gt, 7),
        ">=" => (BinOp::Ge, 7),
        "<<" | "<<<" => (BinOp::Shl, 8),
        ">>" | ">>>" => (BinOp::Shr, 8),
        "+" => (BinOp::Add, 9),
        "-" => (BinOp::Sub, 9),
        _ => return None,
    })
}

const KEYWORDS: &[&str] = &[
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "assign", "always", "begin", "end", "if",
    "else", "case", "casez", "casex", "endcase", "default", "posedge", "negedge", "or", "parameter", "localparam",
    "generate", "endgenerate", "genvar", "function", "endfunction", "task", "endtask", "initial", "integer", "for",
    "while", "repeat", "forever", "signed", "real", "time", "event", "specify", "endspecify", "defparam",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number { .. } => "number".into(),
        Tok::Attr(_) => "attribute".into(),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}
