//! Syntax tree for MiniMod modules.
//!
//! Equality on the tree is structural *including* spans; use
//! [`Module::erase_spans`] before comparing trees that came from different
//! source layouts.

use alloc::boxed::Box;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

/// Source region of a node.
///
/// Lines are 1-based, columns are 0-based byte offsets within the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: u32,
    pub end: u32,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn byte_len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Smallest span covering both.
    pub fn to(&self, other: &Span) -> Span {
        Span {
            start: self.start,
            end: other.end,
            start_line: self.start_line,
            start_col: self.start_col,
            end_line: other.end_line,
            end_col: other.end_col,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModuleStyle {
    Esm,
    Cjs,
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub path: String,
    pub items: Vec<Stmt>,
    pub style: ModuleStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FunctionKind {
    Named,
    Anonymous,
    Method,
    Getter,
    Setter,
    Constructor,
}

impl FunctionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FunctionKind::Named => "named",
            FunctionKind::Anonymous => "anonymous",
            FunctionKind::Method => "method",
            FunctionKind::Getter => "getter",
            FunctionKind::Setter => "setter",
            FunctionKind::Constructor => "constructor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Annotations {
    pub stub_ignore: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub kind: FunctionKind,
    /// Declared name for `named`, property key for members.
    pub name: Option<String>,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub span: Span,
    pub annotations: Annotations,
    /// `<file>:<startLine>:<startCol>`.
    pub uid: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: String,
    /// Constructor, methods, getters and setters in source order.
    pub members: Vec<Rc<FunctionDef>>,
    pub span: Span,
}

impl ClassDef {
    pub fn constructor(&self) -> Option<&Rc<FunctionDef>> {
        self.members.iter().find(|m| m.kind == FunctionKind::Constructor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportSpec {
    pub imported: String,
    pub local: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportClause {
    /// `import d from "x";`
    Default(String),
    /// `import { a, b as c } from "x";`
    Named(Vec<ImportSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSpec {
    pub local: String,
    pub exported: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let { name: String, init: Expr },
    Assign { target: Expr, value: Expr },
    Expr(Expr),
    Return(Option<Expr>),
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    While { cond: Expr, body: Block },
    Function(Rc<FunctionDef>),
    Class(Rc<ClassDef>),
    Import { clause: ImportClause, source: String },
    ExportFunction(Rc<FunctionDef>),
    ExportNamed(Vec<ExportSpec>),
    ExportDefault(Expr),
}

impl StmtKind {
    pub fn is_module_syntax(&self) -> bool {
        matches!(
            self,
            StmtKind::Import { .. }
                | StmtKind::ExportFunction(_)
                | StmtKind::ExportNamed(_)
                | StmtKind::ExportDefault(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding power; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prop {
    /// `k: e`; a function-expression value is a `method` FunctionDef.
    Value { key: String, value: Expr },
    Getter(Rc<FunctionDef>),
    Setter(Rc<FunctionDef>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
    Ident(String),
    This,
    Array(Vec<Expr>),
    Object(Vec<Prop>),
    Function(Rc<FunctionDef>),
    Call { callee: Box<Expr>, args: Vec<Expr> },
    Member { object: Box<Expr>, property: String },
    Index { object: Box<Expr>, index: Box<Expr> },
    New { callee: Box<Expr>, args: Vec<Expr> },
    Binary { op: BinOp, left: Box<Expr>, right: Box<Expr> },
    Not(Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr { kind, span: Span::default() }
    }

    pub fn ident(name: &str) -> Expr {
        Expr::new(ExprKind::Ident(name.into()))
    }

    pub fn string(s: &str) -> Expr {
        Expr::new(ExprKind::Str(s.into()))
    }

    pub fn call(callee: Expr, args: Vec<Expr>) -> Expr {
        Expr::new(ExprKind::Call { callee: Box::new(callee), args })
    }

    pub fn member(object: Expr, property: &str) -> Expr {
        Expr::new(ExprKind::Member { object: Box::new(object), property: property.into() })
    }

    pub fn index(object: Expr, index: Expr) -> Expr {
        Expr::new(ExprKind::Index { object: Box::new(object), index: Box::new(index) })
    }

    pub fn as_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            _ => None,
        }
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { kind, span: Span::default() }
    }
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Block {
        Block { stmts, span: Span::default() }
    }
}
