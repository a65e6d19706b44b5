//! Canonical formatter. Every byte count in size accounting is taken over
//! this printer's output, so its layout is part of the tool's contract.

use alloc::format;
use alloc::string::String;

use super::ast::*;
use super::lexer::{is_ident_char, is_ident_start, STUB_IGNORE_DIRECTIVE};

const INDENT: &str = "  ";
const PREC_UNARY: u8 = 8;
const PREC_POSTFIX: u8 = 9;

pub fn print_module(m: &Module) -> String {
    print_stmts(&m.items)
}

pub fn print_stmts(stmts: &[Stmt]) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    for s in stmts {
        p.stmt(s);
    }
    p.out
}

/// A function as it appears in its defining position, at indent level 0.
pub fn print_function(f: &FunctionDef) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    p.function_head_and_body(f, false);
    p.out
}

/// A function exactly as the module printer lays it out when its first line
/// sits at nesting level `indent`; `in_class` selects the class-member form.
/// The leading pad of the first line is not included.
pub fn print_function_at(f: &FunctionDef, indent: usize, in_class: bool) -> String {
    let mut p = Printer { out: String::new(), indent };
    p.function_head_and_body(f, in_class);
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    p.expr(e, 0);
    p.out
}

pub fn is_identifier_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_ident_start(c)) && chars.all(is_ident_char)
}

pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn format_number(n: f64) -> String {
    format!("{}", n)
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn pad(&mut self) {
        for _ in 0..self.indent {
            self.out.push_str(INDENT);
        }
    }

    fn line_start(&mut self) {
        self.pad();
    }

    fn directive_line(&mut self) {
        self.out.push_str(STUB_IGNORE_DIRECTIVE);
        self.out.push('\n');
        self.pad();
    }

    fn block(&mut self, stmts: &[Stmt], force_multiline: bool) {
        if stmts.is_empty() && !force_multiline {
            self.out.push_str("{}");
            return;
        }
        self.out.push_str("{\n");
        self.indent += 1;
        for s in stmts {
            self.stmt(s);
        }
        self.indent -= 1;
        self.pad();
        self.out.push('}');
    }

    fn stmt(&mut self, s: &Stmt) {
        self.line_start();
        match &s.kind {
            StmtKind::Let { name, init } => {
                self.out.push_str("let ");
                self.out.push_str(name);
                self.out.push_str(" = ");
                self.expr(init, 0);
                self.out.push(';');
            }
            StmtKind::Assign { target, value } => {
                self.expr(target, 0);
                self.out.push_str(" = ");
                self.expr(value, 0);
                self.out.push(';');
            }
            StmtKind::Expr(e) => {
                self.expr(e, 0);
                self.out.push(';');
            }
            StmtKind::Return(e) => {
                self.out.push_str("return");
                if let Some(e) = e {
                    self.out.push(' ');
                    self.expr(e, 0);
                }
                self.out.push(';');
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.out.push_str("if (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.block(&then_block.stmts, false);
                if let Some(b) = else_block {
                    self.out.push_str(" else ");
                    self.block(&b.stmts, false);
                }
            }
            StmtKind::While { cond, body } => {
                self.out.push_str("while (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.block(&body.stmts, false);
            }
            StmtKind::Function(f) => {
                if f.annotations.stub_ignore {
                    self.directive_line();
                }
                self.function_head_and_body(f, false);
            }
            StmtKind::ExportFunction(f) => {
                if f.annotations.stub_ignore {
                    self.directive_line();
                }
                self.out.push_str("export ");
                self.function_head_and_body(f, false);
            }
            StmtKind::Class(c) => self.class(c),
            StmtKind::Import { clause, source } => {
                self.out.push_str("import ");
                match clause {
                    ImportClause::Default(local) => self.out.push_str(local),
                    ImportClause::Named(specs) => {
                        if specs.is_empty() {
                            self.out.push_str("{}");
                        } else {
                            self.out.push_str("{ ");
                            for (i, s) in specs.iter().enumerate() {
                                if i > 0 {
                                    self.out.push_str(", ");
                                }
                                self.out.push_str(&s.imported);
                                if s.local != s.imported {
                                    self.out.push_str(" as ");
                                    self.out.push_str(&s.local);
                                }
                            }
                            self.out.push_str(" }");
                        }
                    }
                }
                self.out.push_str(" from ");
                self.out.push_str(&quote_string(source));
                self.out.push(';');
            }
            StmtKind::ExportNamed(specs) => {
                if specs.is_empty() {
                    self.out.push_str("export {};");
                } else {
                    self.out.push_str("export { ");
                    for (i, s) in specs.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(", ");
                        }
                        self.out.push_str(&s.local);
                        if s.exported != s.local {
                            self.out.push_str(" as ");
                            self.out.push_str(&s.exported);
                        }
                    }
                    self.out.push_str(" };");
                }
            }
            StmtKind::ExportDefault(e) => {
                self.out.push_str("export default ");
                self.expr(e, 0);
                self.out.push(';');
            }
        }
        self.out.push('\n');
    }

    fn class(&mut self, c: &ClassDef) {
        self.out.push_str("class ");
        self.out.push_str(&c.name);
        if c.members.is_empty() {
            self.out.push_str(" {}");
            return;
        }
        self.out.push_str(" {\n");
        self.indent += 1;
        for m in &c.members {
            self.pad();
            if m.annotations.stub_ignore {
                self.directive_line();
            }
            self.function_head_and_body(m, true);
            self.out.push('\n');
        }
        self.indent -= 1;
        self.pad();
        self.out.push('}');
    }

    fn params(&mut self, params: &[String]) {
        self.out.push('(');
        for (i, p) in params.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.out.push_str(p);
        }
        self.out.push(')');
    }

    fn key(&mut self, key: &str) {
        if is_identifier_name(key) {
            self.out.push_str(key);
        } else {
            self.out.push_str(&quote_string(key));
        }
    }

    fn function_head_and_body(&mut self, f: &FunctionDef, in_class: bool) {
        match f.kind {
            FunctionKind::Named => {
                self.out.push_str("function ");
                self.out.push_str(f.name.as_deref().unwrap_or(""));
            }
            FunctionKind::Method if in_class => self.out.push_str(f.name.as_deref().unwrap_or("")),
            FunctionKind::Anonymous | FunctionKind::Method => self.out.push_str("function"),
            FunctionKind::Getter => {
                self.out.push_str("get ");
                self.key(f.name.as_deref().unwrap_or(""));
            }
            FunctionKind::Setter => {
                self.out.push_str("set ");
                self.key(f.name.as_deref().unwrap_or(""));
            }
            FunctionKind::Constructor => self.out.push_str("constructor"),
        }
        self.params(&f.params);
        self.out.push(' ');
        self.block(&f.body, f.annotations.stub_ignore);
    }

    /// A function in expression position; an annotated one gets its own line
    /// so the directive lands on the line right above it.
    fn function_expr(&mut self, f: &FunctionDef) {
        if f.annotations.stub_ignore {
            self.out.push('\n');
            self.pad();
            self.directive_line();
        }
        self.function_head_and_body(f, false);
    }

    fn args(&mut self, args: &[Expr]) {
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(a, 0);
        }
        self.out.push(')');
    }

    fn expr(&mut self, e: &Expr, min_prec: u8) {
        let prec = expr_precedence(e);
        let parens = prec < min_prec;
        if parens {
            self.out.push('(');
        }
        match &e.kind {
            ExprKind::Num(n) => {
                debug_assert!(!n.is_sign_negative(), "negative literal in tree");
                self.out.push_str(&format_number(*n));
            }
            ExprKind::Str(s) => self.out.push_str(&quote_string(s)),
            ExprKind::Bool(b) => self.out.push_str(if *b { "true" } else { "false" }),
            ExprKind::Null => self.out.push_str("null"),
            ExprKind::Ident(n) => self.out.push_str(n),
            ExprKind::This => self.out.push_str("this"),
            ExprKind::Array(items) => {
                self.out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(item, 0);
                }
                self.out.push(']');
            }
            ExprKind::Object(props) => {
                if props.is_empty() {
                    self.out.push_str("{}");
                } else {
                    self.out.push_str("{ ");
                    for (i, p) in props.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(", ");
                        }
                        match p {
                            Prop::Value { key, value } => {
                                self.key(key);
                                self.out.push_str(": ");
                                self.expr(value, 0);
                            }
                            Prop::Getter(f) | Prop::Setter(f) => self.function_expr(f),
                        }
                    }
                    self.out.push_str(" }");
                }
            }
            ExprKind::Function(f) => self.function_expr(f),
            ExprKind::Call { callee, args } => {
                self.callee(callee);
                self.args(args);
            }
            ExprKind::Member { object, property } => {
                self.member_object(object);
                self.out.push('.');
                self.out.push_str(property);
            }
            ExprKind::Index { object, index } => {
                self.member_object(object);
                self.out.push('[');
                self.expr(index, 0);
                self.out.push(']');
            }
            ExprKind::New { callee, args } => {
                self.out.push_str("new ");
                if is_new_target(callee) {
                    self.expr(callee, PREC_POSTFIX);
                } else {
                    self.out.push('(');
                    self.expr(callee, 0);
                    self.out.push(')');
                }
                self.args(args);
            }
            ExprKind::Binary { op, left, right } => {
                let p = op.precedence();
                self.expr(left, p);
                self.out.push(' ');
                self.out.push_str(op.symbol());
                self.out.push(' ');
                self.expr(right, p + 1);
            }
            ExprKind::Not(inner) => {
                self.out.push('!');
                self.expr(inner, PREC_UNARY);
            }
        }
        if parens {
            self.out.push(')');
        }
    }

    fn callee(&mut self, callee: &Expr) {
        match callee.kind {
            ExprKind::Function(_) | ExprKind::Object(_) => {
                self.out.push('(');
                self.expr(callee, 0);
                self.out.push(')');
            }
            _ => self.expr(callee, PREC_POSTFIX),
        }
    }

    fn member_object(&mut self, object: &Expr) {
        match object.kind {
            ExprKind::Num(_) | ExprKind::Function(_) | ExprKind::Object(_) => {
                self.out.push('(');
                self.expr(object, 0);
                self.out.push(')');
            }
            _ => self.expr(object, PREC_POSTFIX),
        }
    }
}

fn expr_precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Not(_) => PREC_UNARY,
        ExprKind::Call { .. } | ExprKind::Member { .. } | ExprKind::Index { .. } | ExprKind::New { .. } => {
            PREC_POSTFIX
        }
        _ => 10,
    }
}

/// Whether `new <callee>(...)` can be printed without parenthesising the
/// callee: only identifier/`this` roots followed by member accesses.
fn is_new_target(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Ident(_) | ExprKind::This => true,
        ExprKind::Member { object, .. } => is_new_target(object),
        ExprKind::Index { object, .. } => is_new_target(object),
        _ => false,
    }
}
