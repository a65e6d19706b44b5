//! Lexical name resolution.
//!
//! Every block (module top level, function body, `if`/`while` body) is a
//! scope whose declarations are visible throughout the block, matching the
//! interpreter's hoisting rules.

use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::visit::{self, Visitor};

#[derive(Debug, Clone)]
pub enum Decl {
    /// `let`, parameter or `arguments`.
    Local,
    Function(Rc<FunctionDef>),
    Class(Rc<ClassDef>),
    /// `imported` is `"default"` for a default import.
    Import { source: String, imported: String },
}

/// Declarations made directly in a statement list.
pub fn block_decls(stmts: &[Stmt]) -> Vec<(String, Decl)> {
    let mut out = Vec::new();
    for s in stmts {
        match &s.kind {
            StmtKind::Let { name, .. } => out.push((name.clone(), Decl::Local)),
            StmtKind::Function(f) | StmtKind::ExportFunction(f) => {
                out.push((f.name.clone().unwrap_or_default(), Decl::Function(f.clone())))
            }
            StmtKind::Class(c) => out.push((c.name.clone(), Decl::Class(c.clone()))),
            StmtKind::Import { clause, source } => match clause {
                ImportClause::Default(local) => out.push((
                    local.clone(),
                    Decl::Import { source: source.clone(), imported: "default".into() },
                )),
                ImportClause::Named(specs) => {
                    for sp in specs {
                        out.push((
                            sp.local.clone(),
                            Decl::Import { source: source.clone(), imported: sp.imported.clone() },
                        ));
                    }
                }
            },
            _ => {}
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct Scopes {
    frames: Vec<Vec<(String, Decl)>>,
}

/// A successful lookup.
#[derive(Debug, Clone, Copy)]
pub struct Resolved<'a> {
    pub decl: &'a Decl,
    /// Declared in the outermost (module) frame.
    pub top_level: bool,
}

impl Scopes {
    pub fn push(&mut self, decls: Vec<(String, Decl)>) {
        self.frames.push(decls);
    }

    pub fn pop(&mut self) {
        self.frames.pop();
    }

    pub fn push_function(&mut self, f: &FunctionDef) {
        let mut decls: Vec<(String, Decl)> =
            f.params.iter().map(|p| (p.clone(), Decl::Local)).collect();
        decls.push(("arguments".into(), Decl::Local));
        decls.extend(block_decls(&f.body));
        self.frames.push(decls);
    }

    pub fn resolve(&self, name: &str) -> Option<Resolved<'_>> {
        for (i, frame) in self.frames.iter().enumerate().rev() {
            if let Some((_, d)) = frame.iter().rev().find(|(n, _)| n == name) {
                return Some(Resolved { decl: d, top_level: i == 0 });
            }
        }
        None
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }
}

/// Hooks for [`walk_scoped`]. All default to no-ops.
pub trait ScopeHandler {
    /// Every expression, before its children.
    fn expr(&mut self, _e: &Expr, _scopes: &Scopes) {}
    /// Identifier references, including assignment targets.
    fn ident(&mut self, _e: &Expr, _name: &str, _resolved: Option<Resolved<'_>>) {}
    fn enter_function(&mut self, _f: &Rc<FunctionDef>) {}
    fn exit_function(&mut self, _f: &Rc<FunctionDef>) {}
    fn class(&mut self, _c: &Rc<ClassDef>) {}
}

struct Walker<'h, H: ScopeHandler> {
    scopes: Scopes,
    h: &'h mut H,
}

impl<H: ScopeHandler> Walker<'_, H> {
    fn block(&mut self, stmts: &[Stmt]) {
        self.scopes.push(block_decls(stmts));
        visit::walk_stmts(self, stmts);
        self.scopes.pop();
    }
}

impl<H: ScopeHandler> Visitor for Walker<'_, H> {
    fn visit_stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::If { cond, then_block, else_block } => {
                self.visit_expr(cond);
                self.block(&then_block.stmts);
                if let Some(b) = else_block {
                    self.block(&b.stmts);
                }
            }
            StmtKind::While { cond, body } => {
                self.visit_expr(cond);
                self.block(&body.stmts);
            }
            _ => visit::walk_stmt(self, s),
        }
    }

    fn visit_expr(&mut self, e: &Expr) {
        self.h.expr(e, &self.scopes);
        if let ExprKind::Ident(name) = &e.kind {
            let r = self.scopes.resolve(name);
            self.h.ident(e, name, r);
        }
        visit::walk_expr(self, e);
    }

    fn visit_function(&mut self, f: &Rc<FunctionDef>) {
        self.h.enter_function(f);
        self.scopes.push_function(f);
        visit::walk_stmts(self, &f.body);
        self.scopes.pop();
        self.h.exit_function(f);
    }

    fn visit_class(&mut self, c: &Rc<ClassDef>) {
        self.h.class(c);
        visit::walk_class(self, c);
    }
}

/// Walks a module (or eval'd statement list) with scope tracking. The
/// statements form the outermost frame.
pub fn walk_scoped<H: ScopeHandler>(stmts: &[Stmt], h: &mut H) {
    let mut w = Walker { scopes: Scopes::default(), h };
    w.block(stmts);
}

/// Like [`walk_scoped`] but visits only `stmts`, with the declarations of
/// `top` as the outermost frame.
pub fn walk_scoped_in<H: ScopeHandler>(top: &[Stmt], stmts: &[Stmt], h: &mut H) {
    let mut w = Walker { scopes: Scopes::default(), h };
    w.scopes.push(block_decls(top));
    visit::walk_stmts(&mut w, stmts);
}

/// Every identifier spelled anywhere in the statements: references,
/// declarations, parameters, property names and import/export names.
/// Used to pick names that cannot capture or shadow anything.
pub fn all_names(stmts: &[Stmt]) -> alloc::collections::BTreeSet<String> {
    struct Names(alloc::collections::BTreeSet<String>);
    impl Visitor for Names {
        fn visit_stmt(&mut self, s: &Stmt) {
            for (n, _) in block_decls(core::slice::from_ref(s)) {
                self.0.insert(n);
            }
            if let StmtKind::ExportNamed(specs) = &s.kind {
                for sp in specs {
                    self.0.insert(sp.local.clone());
                    self.0.insert(sp.exported.clone());
                }
            }
            visit::walk_stmt(self, s);
        }
        fn visit_expr(&mut self, e: &Expr) {
            match &e.kind {
                ExprKind::Ident(n) => {
                    self.0.insert(n.clone());
                }
                ExprKind::Member { property, .. } => {
                    self.0.insert(property.clone());
                }
                _ => {}
            }
            visit::walk_expr(self, e);
        }
        fn visit_function(&mut self, f: &Rc<FunctionDef>) {
            for p in &f.params {
                self.0.insert(p.clone());
            }
            if let Some(n) = &f.name {
                self.0.insert(n.clone());
            }
            visit::walk_function(self, f);
        }
    }
    let mut n = Names(Default::default());
    visit::walk_stmts(&mut n, stmts);
    n.0
}

/// `base`, or `base` with the shortest numeric suffix, not in `taken`.
pub fn fresh_name(base: &str, taken: &alloc::collections::BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.into();
    }
    let mut i = 1usize;
    loop {
        let candidate = alloc::format!("{}{}", base, i);
        if !taken.contains(&candidate) {
            return candidate;
        }
        i += 1;
    }
}
