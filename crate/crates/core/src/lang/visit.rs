//! Read-only and mutating tree walks in source order.

use alloc::rc::Rc;

use super::ast::*;

pub trait Visitor {
    fn visit_stmt(&mut self, s: &Stmt) {
        walk_stmt(self, s)
    }
    fn visit_expr(&mut self, e: &Expr) {
        walk_expr(self, e)
    }
    fn visit_function(&mut self, f: &Rc<FunctionDef>) {
        walk_function(self, f)
    }
    fn visit_class(&mut self, c: &Rc<ClassDef>) {
        walk_class(self, c)
    }
}

pub fn walk_stmts<V: Visitor + ?Sized>(v: &mut V, stmts: &[Stmt]) {
    for s in stmts {
        v.visit_stmt(s);
    }
}

pub fn walk_stmt<V: Visitor + ?Sized>(v: &mut V, s: &Stmt) {
    match &s.kind {
        StmtKind::Let { init, .. } => v.visit_expr(init),
        StmtKind::Assign { target, value } => {
            v.visit_expr(target);
            v.visit_expr(value);
        }
        StmtKind::Expr(e) | StmtKind::ExportDefault(e) => v.visit_expr(e),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                v.visit_expr(e)
            }
        }
        StmtKind::If { cond, then_block, else_block } => {
            v.visit_expr(cond);
            walk_stmts(v, &then_block.stmts);
            if let Some(b) = else_block {
                walk_stmts(v, &b.stmts);
            }
        }
        StmtKind::While { cond, body } => {
            v.visit_expr(cond);
            walk_stmts(v, &body.stmts);
        }
        StmtKind::Function(f) | StmtKind::ExportFunction(f) => v.visit_function(f),
        StmtKind::Class(c) => v.visit_class(c),
        StmtKind::Import { .. } | StmtKind::ExportNamed(_) => {}
    }
}

pub fn walk_expr<V: Visitor + ?Sized>(v: &mut V, e: &Expr) {
    match &e.kind {
        ExprKind::Num(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::Ident(_)
        | ExprKind::This => {}
        ExprKind::Array(items) => {
            for i in items {
                v.visit_expr(i);
            }
        }
        ExprKind::Object(props) => {
            for p in props {
                match p {
                    Prop::Value { value, .. } => v.visit_expr(value),
                    Prop::Getter(f) | Prop::Setter(f) => v.visit_function(f),
                }
            }
        }
        ExprKind::Function(f) => v.visit_function(f),
        ExprKind::Call { callee, args } | ExprKind::New { callee, args } => {
            v.visit_expr(callee);
            for a in args {
                v.visit_expr(a);
            }
        }
        ExprKind::Member { object, .. } => v.visit_expr(object),
        ExprKind::Index { object, index } => {
            v.visit_expr(object);
            v.visit_expr(index);
        }
        ExprKind::Binary { left, right, .. } => {
            v.visit_expr(left);
            v.visit_expr(right);
        }
        ExprKind::Not(inner) => v.visit_expr(inner),
    }
}

pub fn walk_function<V: Visitor + ?Sized>(v: &mut V, f: &Rc<FunctionDef>) {
    walk_stmts(v, &f.body);
}

pub fn walk_class<V: Visitor + ?Sized>(v: &mut V, c: &Rc<ClassDef>) {
    for m in &c.members {
        v.visit_function(m);
    }
}

pub trait VisitorMut {
    fn visit_stmt_mut(&mut self, s: &mut Stmt) {
        walk_stmt_mut(self, s)
    }
    fn visit_expr_mut(&mut self, e: &mut Expr) {
        walk_expr_mut(self, e)
    }
    fn visit_function_mut(&mut self, f: &mut Rc<FunctionDef>) {
        walk_function_mut(self, f)
    }
    fn visit_class_mut(&mut self, c: &mut Rc<ClassDef>) {
        walk_class_mut(self, c)
    }
}

pub fn walk_stmts_mut<V: VisitorMut + ?Sized>(v: &mut V, stmts: &mut [Stmt]) {
    for s in stmts {
        v.visit_stmt_mut(s);
    }
}

pub fn walk_stmt_mut<V: VisitorMut + ?Sized>(v: &mut V, s: &mut Stmt) {
    match &mut s.kind {
        StmtKind::Let { init, .. } => v.visit_expr_mut(init),
        StmtKind::Assign { target, value } => {
            v.visit_expr_mut(target);
            v.visit_expr_mut(value);
        }
        StmtKind::Expr(e) | StmtKind::ExportDefault(e) => v.visit_expr_mut(e),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                v.visit_expr_mut(e)
            }
        }
        StmtKind::If { cond, then_block, else_block } => {
            v.visit_expr_mut(cond);
            walk_stmts_mut(v, &mut then_block.stmts);
            if let Some(b) = else_block {
                walk_stmts_mut(v, &mut b.stmts);
            }
        }
        StmtKind::While { cond, body } => {
            v.visit_expr_mut(cond);
            walk_stmts_mut(v, &mut body.stmts);
        }
        StmtKind::Function(f) | StmtKind::ExportFunction(f) => v.visit_function_mut(f),
        StmtKind::Class(c) => v.visit_class_mut(c),
        StmtKind::Import { .. } | StmtKind::ExportNamed(_) => {}
    }
}

pub fn walk_expr_mut<V: VisitorMut + ?Sized>(v: &mut V, e: &mut Expr) {
    match &mut e.kind {
        ExprKind::Num(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::Ident(_)
        | ExprKind::This => {}
        ExprKind::Array(items) => {
            for i in items {
                v.visit_expr_mut(i);
            }
        }
        ExprKind::Object(props) => {
            for p in props {
                match p {
                    Prop::Value { value, .. } => v.visit_expr_mut(value),
                    Prop::Getter(f) | Prop::Setter(f) => v.visit_function_mut(f),
                }
            }
        }
        ExprKind::Function(f) => v.visit_function_mut(f),
        ExprKind::Call { callee, args } | ExprKind::New { callee, args } => {
            v.visit_expr_mut(callee);
            for a in args {
                v.visit_expr_mut(a);
            }
        }
        ExprKind::Member { object, .. } => v.visit_expr_mut(object),
        ExprKind::Index { object, index } => {
            v.visit_expr_mut(object);
            v.visit_expr_mut(index);
        }
        ExprKind::Binary { left, right, .. } => {
            v.visit_expr_mut(left);
            v.visit_expr_mut(right);
        }
        ExprKind::Not(inner) => v.visit_expr_mut(inner),
    }
}

pub fn walk_function_mut<V: VisitorMut + ?Sized>(v: &mut V, f: &mut Rc<FunctionDef>) {
    walk_stmts_mut(v, &mut Rc::make_mut(f).body);
}

pub fn walk_class_mut<V: VisitorMut + ?Sized>(v: &mut V, c: &mut Rc<ClassDef>) {
    for m in &mut Rc::make_mut(c).members {
        v.visit_function_mut(m);
    }
}
