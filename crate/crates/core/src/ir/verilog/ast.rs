// SPDX-License-Identifier: Apache-2.0
use super::lexer::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Input,
    Output,
    Wire,
    Reg,
}

#[derive(Debug, Clone)]
pub struct Decl {
    pub kind: DeclKind,
    /// `output reg` style declarations set both.
    pub is_reg: bool,
    pub range: Option<(Expr, Expr)>,
    pub names: Vec<(String, Option<Expr>, Pos)>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct ModuleAst {
    pub name: String,
    pub pos: Pos,
    pub blackbox: bool,
    /// Header port names, in order.
    pub header: Vec<(String, Pos)>,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone)]
pub enum Conns {
    Named(Vec<(String, Option<Expr>, Pos)>),
    Positional(Vec<Option<Expr>>),
}

#[derive(Debug, Clone)]
pub enum Item {
    Decl(Decl),
    Assign { lhs: Expr, rhs: Expr, pos: Pos },
    Inst { module: String, name: String, conns: Conns, pos: Pos },
    Always { clock: String, body: Stmt, pos: Pos },
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Block(Vec<Stmt>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    Assign(Expr, Expr),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    LogNot,
    Neg,
    Plus,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Xnor,
    LogAnd,
    LogOr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Shl,
    Shr,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Ident(String, Pos),
    Number { bits: Vec<bool>, width: Option<u32>, pos: Pos },
    Index(String, Box<Expr>, Pos),
    Slice(String, Box<Expr>, Box<Expr>, Pos),
    Unary(UnOp, Box<Expr>, Pos),
    Binary(BinOp, Box<Expr>, Box<Expr>, Pos),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>, Pos),
    Concat(Vec<Expr>, Pos),
    Repeat(Box<Expr>, Vec<Expr>, Pos),
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Ident(_, p)
            | Expr::Number { pos: p, .. }
            | Expr::Index(_, _, p)
            | Expr::Slice(_, _, _, p)
            | Expr::Unary(_, _, p)
            | Expr::Binary(_, _, _, p)
            | Expr::Ternary(_, _, _, p)
            | Expr::Concat(_, p)
            | Expr::Repeat(_, _, p) => *p,
        }
    }
}
