//! The MiniMod language: lexer, parser, canonical printer and tree utilities.

pub mod ast;
pub mod lexer;
mod parser;
pub mod printer;
pub mod scope;
pub mod visit;

use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use ast::*;
pub use parser::is_reserved;
pub use printer::{print_expr, print_function, print_module, print_stmts};

use visit::{Visitor, VisitorMut};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LangError {
    Parse { path: String, error: ParseError },
    /// ES-module and CommonJS constructs in the same file.
    StyleMix { path: String },
}

impl fmt::Display for LangError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LangError::Parse { path, error } => write!(f, "parse error in {}:{}", path, error),
            LangError::StyleMix { path } => {
                write!(f, "{}: module mixes import/export with require/module.exports", path)
            }
        }
    }
}

/// Parses a full module and classifies its module style.
pub fn parse(text: &str, path: &str) -> Result<Module, LangError> {
    let items = parse_statements(text, path)
        .map_err(|error| LangError::Parse { path: path.into(), error })?;
    let esm = items.iter().any(|s| s.kind.is_module_syntax());
    let cjs = uses_commonjs(&items);
    let style = match (esm, cjs) {
        (true, true) => return Err(LangError::StyleMix { path: path.into() }),
        (true, false) => ModuleStyle::Esm,
        (false, true) => ModuleStyle::Cjs,
        (false, false) => ModuleStyle::Plain,
    };
    Ok(Module { path: path.into(), items, style })
}

/// Parses a statement list without style classification. Import and export
/// declarations are accepted at the top level; callers decide whether they
/// are legal in context.
pub fn parse_statements(text: &str, path: &str) -> Result<Vec<Stmt>, ParseError> {
    parser::Parser::new(text, path)?.parse_items()
}

/// Whether any statement refers to `require`, `module.exports` or `exports.`.
pub fn uses_commonjs(stmts: &[Stmt]) -> bool {
    struct Finder(bool);
    impl Visitor for Finder {
        fn visit_expr(&mut self, e: &Expr) {
            match &e.kind {
                ExprKind::Ident(n) if n == "require" => self.0 = true,
                ExprKind::Member { object, property } => match object.as_ident() {
                    Some("module") if property == "exports" => self.0 = true,
                    Some("exports") => self.0 = true,
                    _ => {}
                },
                _ => {}
            }
            if !self.0 {
                visit::walk_expr(self, e);
            }
        }
    }
    let mut f = Finder(false);
    visit::walk_stmts(&mut f, stmts);
    f.0
}

/// Every function in source order, including nested functions and
/// class/object members.
pub fn functions_of(m: &Module) -> Vec<Rc<FunctionDef>> {
    functions_in(&m.items)
}

pub fn functions_in(stmts: &[Stmt]) -> Vec<Rc<FunctionDef>> {
    struct Collect(Vec<Rc<FunctionDef>>);
    impl Visitor for Collect {
        fn visit_function(&mut self, f: &Rc<FunctionDef>) {
            self.0.push(f.clone());
            visit::walk_function(self, f);
        }
    }
    let mut c = Collect(Vec::new());
    visit::walk_stmts(&mut c, stmts);
    c.0
}

struct Eraser;

impl VisitorMut for Eraser {
    fn visit_stmt_mut(&mut self, s: &mut Stmt) {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::If { then_block, else_block, .. } => {
                then_block.span = Span::default();
                if let Some(b) = else_block {
                    b.span = Span::default();
                }
            }
            StmtKind::While { body, .. } => body.span = Span::default(),
            _ => {}
        }
        visit::walk_stmt_mut(self, s);
    }
    fn visit_expr_mut(&mut self, e: &mut Expr) {
        e.span = Span::default();
        visit::walk_expr_mut(self, e);
    }
    fn visit_function_mut(&mut self, f: &mut Rc<FunctionDef>) {
        let d = Rc::make_mut(f);
        d.span = Span::default();
        d.uid = String::new();
        visit::walk_function_mut(self, f);
    }
    fn visit_class_mut(&mut self, c: &mut Rc<ClassDef>) {
        Rc::make_mut(c).span = Span::default();
        visit::walk_class_mut(self, c);
    }
}

impl Module {
    /// Copy with every span and uid cleared, for structural comparison.
    pub fn erase_spans(&self) -> Module {
        let mut m = self.clone();
        visit::walk_stmts_mut(&mut Eraser, &mut m.items);
        m
    }
}

pub fn erase_spans(stmts: &[Stmt]) -> Vec<Stmt> {
    let mut v = stmts.to_vec();
    visit::walk_stmts_mut(&mut Eraser, &mut v);
    v
}

/// Checks that every node's span lies within its parent's span and that
/// `byte_len` matches the text it denotes. Returns the first offending
/// node's description.
pub fn check_span_containment(m: &Module, text: &str) -> Result<(), String> {
    struct Check<'a> {
        stack: Vec<Span>,
        text: &'a str,
        error: Option<String>,
    }
    impl Check<'_> {
        fn enter(&mut self, span: Span, what: &str) -> bool {
            if self.error.is_some() {
                return false;
            }
            if let Some(parent) = self.stack.last() {
                if !parent.contains(&span) {
                    self.error = Some(alloc::format!("{} at {}:{} escapes its parent", what, span.start_line, span.start_col));
                    return false;
                }
            }
            if self.text.get(span.start as usize..span.end as usize).map(str::len) != Some(span.byte_len()) {
                self.error = Some(alloc::format!("{} has an invalid byte range", what));
                return false;
            }
            self.stack.push(span);
            true
        }
    }
    impl Visitor for Check<'_> {
        fn visit_stmt(&mut self, s: &Stmt) {
            if self.enter(s.span, "statement") {
                visit::walk_stmt(self, s);
                self.stack.pop();
            }
        }
        fn visit_expr(&mut self, e: &Expr) {
            if self.enter(e.span, "expression") {
                visit::walk_expr(self, e);
                self.stack.pop();
            }
        }
        fn visit_function(&mut self, f: &Rc<FunctionDef>) {
            if self.enter(f.span, "function") {
                visit::walk_function(self, f);
                self.stack.pop();
            }
        }
        fn visit_class(&mut self, c: &Rc<ClassDef>) {
            if self.enter(c.span, "class") {
                visit::walk_class(self, c);
                self.stack.pop();
            }
        }
    }
    let mut c = Check { stack: Vec::new(), text, error: None };
    visit::walk_stmts(&mut c, &m.items);
    match c.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
