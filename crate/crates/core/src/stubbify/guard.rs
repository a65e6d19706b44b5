//! Call guarding for stored code.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;

use crate::lang::ast::*;
use crate::lang::visit::{self, VisitorMut};
use crate::lang::{self, ParseError};

struct Guarder;

impl VisitorMut for Guarder {
    fn visit_expr_mut(&mut self, e: &mut Expr) {
        visit::walk_expr_mut(self, e);
        let ExprKind::Call { callee, args } = &mut e.kind else { return };
        let args = core::mem::take(args);
        let span = e.span;
        let callee = core::mem::replace(&mut **callee, Expr::new(ExprKind::Null));
        e.kind = match callee.kind {
            ExprKind::Member { object, property } => ExprKind::Call {
                callee: Box::new(Expr::ident("__guardCall")),
                args: vec![*object, Expr::string(&property), Expr::new(ExprKind::Array(args))],
            },
            ExprKind::Index { object, index } => ExprKind::Call {
                callee: Box::new(Expr::ident("__guardCall")),
                args: vec![*object, *index, Expr::new(ExprKind::Array(args))],
            },
            kind => ExprKind::Call {
                callee: Box::new(Expr::call(Expr::ident("__guardCheck"), vec![Expr { kind, span: callee.span }])),
                args,
            },
        };
        e.span = span;
    }
}

/// Rewrites every call `E(args)` to `__guardCheck(E)(args)` and every
/// method call `E.k(args)` / `E[k](args)` to `__guardCall(E, k, [args])`.
pub fn apply_guards(stored_text: &str) -> Result<String, ParseError> {
    let mut stmts = lang::parse_statements(stored_text, "<stored>")?;
    visit::walk_stmts_mut(&mut Guarder, &mut stmts);
    Ok(lang::print_stmts(&stmts))
}
