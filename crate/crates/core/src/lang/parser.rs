use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;

const RESERVED: &[&str] = &[
    "let", "function", "return", "if", "else", "while", "class", "true", "false", "null", "this",
    "new", "import", "export", "default",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

pub(crate) struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    path: &'a str,
    directives: BTreeSet<u32>,
}

impl<'a> Parser<'a> {
    pub fn new(src: &str, path: &'a str) -> Result<Self, ParseError> {
        let lexed = lex(src)?;
        Ok(Parser { tokens: lexed.tokens, pos: 0, path, directives: lexed.directive_lines })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_n(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let s = self.span();
        ParseError { line: s.start_line, col: s.start_col, message: message.into() }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num(n) => format!("number {}", n),
            Tok::Str(_) => "string literal".into(),
            Tok::Ident(w) => format!("`{}`", w),
            Tok::Punct(p) => format!("`{}`", p),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<Span, ParseError> {
        if self.is_punct(p) {
            Ok(self.advance().span)
        } else {
            Err(self.error_here(format!("expected `{}`, found {}", p, Self::describe(self.peek()))))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<Span, ParseError> {
        if self.is_word(w) {
            Ok(self.advance().span)
        } else {
            Err(self.error_here(format!("expected `{}`, found {}", w, Self::describe(self.peek()))))
        }
    }

    /// A binding identifier: any identifier that is not reserved.
    fn binding_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) if !is_reserved(&w) => {
                self.advance();
                Ok(w)
            }
            other => Err(self.error_here(format!("expected identifier, found {}", Self::describe(&other)))),
        }
    }

    /// Property names may be any identifier, reserved words included.
    fn property_name(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) => {
                self.advance();
                Ok(w)
            }
            other => Err(self.error_here(format!("expected property name, found {}", Self::describe(&other)))),
        }
    }

    fn string_lit(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected string literal, found {}", Self::describe(&other)))),
        }
    }

    fn uid_for(&self, span: &Span) -> String {
        format!("{}:{}:{}", self.path, span.start_line, span.start_col)
    }

    fn annotations_for(&self, span: &Span) -> Annotations {
        Annotations {
            stub_ignore: span.start_line > 1 && self.directives.contains(&(span.start_line - 1)),
        }
    }

    // ---- statements ----

    pub fn parse_items(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.statement(true)?);
        }
        Ok(items)
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        let open = self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("unterminated block"));
            }
            stmts.push(self.statement(false)?);
        }
        let close = self.advance().span;
        Ok(Block { stmts, span: open.to(&close) })
    }

    fn statement(&mut self, top: bool) -> Result<Stmt, ParseError> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Ident(w) => match w.as_str() {
                "let" => {
                    self.advance();
                    let name = self.binding_ident()?;
                    self.expect_punct("=")?;
                    let init = self.expression()?;
                    self.expect_punct(";")?;
                    StmtKind::Let { name, init }
                }
                "return" => {
                    self.advance();
                    let value = if self.is_punct(";") { None } else { Some(self.expression()?) };
                    self.expect_punct(";")?;
                    StmtKind::Return(value)
                }
                "if" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let cond = self.expression()?;
                    self.expect_punct(")")?;
                    let then_block = self.block()?;
                    let else_block = if self.is_word("else") {
                        self.advance();
                        Some(self.block()?)
                    } else {
                        None
                    };
                    StmtKind::If { cond, then_block, else_block }
                }
                "while" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let cond = self.expression()?;
                    self.expect_punct(")")?;
                    let body = self.block()?;
                    StmtKind::While { cond, body }
                }
                "function" if matches!(self.peek_n(1), Tok::Ident(_)) => {
                    StmtKind::Function(self.function_decl()?)
                }
                "class" => StmtKind::Class(self.class_decl()?),
                "import" if top => self.import_decl()?,
                "export" if top => self.export_decl()?,
                "import" | "export" => {
                    return Err(self.error_here(format!("`{}` is only allowed at module top level", w)))
                }
                _ => self.expression_statement()?,
            },
            _ => self.expression_statement()?,
        };
        Ok(Stmt { kind, span: start.to(&self.prev_span()) })
    }

    fn expression_statement(&mut self) -> Result<StmtKind, ParseError> {
        let expr = self.expression()?;
        if self.eat_punct("=") {
            match expr.kind {
                ExprKind::Ident(_) | ExprKind::Member { .. } | ExprKind::Index { .. } => {}
                _ => return Err(self.error_here("invalid assignment target")),
            }
            let value = self.expression()?;
            self.expect_punct(";")?;
            return Ok(StmtKind::Assign { target: expr, value });
        }
        self.expect_punct(";")?;
        Ok(StmtKind::Expr(expr))
    }

    fn params(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                params.push(self.binding_ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    fn function_rest(
        &mut self,
        start: Span,
        kind: FunctionKind,
        name: Option<String>,
    ) -> Result<Rc<FunctionDef>, ParseError> {
        let params = self.params()?;
        let body = self.block()?;
        let span = start.to(&body.span);
        Ok(Rc::new(FunctionDef {
            kind,
            name,
            params,
            body: body.stmts,
            span,
            annotations: self.annotations_for(&span),
            uid: self.uid_for(&span),
        }))
    }

    fn function_decl(&mut self) -> Result<Rc<FunctionDef>, ParseError> {
        let start = self.expect_word("function")?;
        let name = self.binding_ident()?;
        self.function_rest(start, FunctionKind::Named, Some(name))
    }

    fn class_decl(&mut self) -> Result<Rc<ClassDef>, ParseError> {
        let start = self.expect_word("class")?;
        let name = self.binding_ident()?;
        self.expect_punct("{")?;
        let mut members = Vec::new();
        while !self.is_punct("}") {
            let mstart = self.span();
            let word = self.property_name()?;
            let member = match word.as_str() {
                "constructor" if self.is_punct("(") => {
                    self.function_rest(mstart, FunctionKind::Constructor, Some(word))?
                }
                "get" | "set" if !self.is_punct("(") => {
                    let key = self.property_name()?;
                    let kind = if word == "get" { FunctionKind::Getter } else { FunctionKind::Setter };
                    self.function_rest(mstart, kind, Some(key))?
                }
                _ => self.function_rest(mstart, FunctionKind::Method, Some(word))?,
            };
            members.push(member);
        }
        let close = self.advance().span;
        Ok(Rc::new(ClassDef { name, members, span: start.to(&close) }))
    }

    fn import_decl(&mut self) -> Result<StmtKind, ParseError> {
        self.expect_word("import")?;
        let clause = if self.eat_punct("{") {
            let mut specs = Vec::new();
            if !self.is_punct("}") {
                loop {
                    let imported = self.property_name()?;
                    let local = if self.is_word("as") {
                        self.advance();
                        self.binding_ident()?
                    } else {
                        if is_reserved(&imported) {
                            return Err(self.error_here("reserved word cannot be an import binding"));
                        }
                        imported.clone()
                    };
                    specs.push(ImportSpec { imported, local });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct("}")?;
            ImportClause::Named(specs)
        } else {
            ImportClause::Default(self.binding_ident()?)
        };
        self.expect_word("from")?;
        let source = self.string_lit()?;
        self.expect_punct(";")?;
        Ok(StmtKind::Import { clause, source })
    }

    fn export_decl(&mut self) -> Result<StmtKind, ParseError> {
        self.expect_word("export")?;
        if self.is_word("function") {
            return Ok(StmtKind::ExportFunction(self.function_decl()?));
        }
        if self.is_word("default") {
            self.advance();
            let e = self.expression()?;
            self.expect_punct(";")?;
            return Ok(StmtKind::ExportDefault(e));
        }
        self.expect_punct("{")?;
        let mut specs = Vec::new();
        if !self.is_punct("}") {
            loop {
                let local = self.binding_ident()?;
                let exported = if self.is_word("as") {
                    self.advance();
                    self.property_name()?
                } else {
                    local.clone()
                };
                specs.push(ExportSpec { local, exported });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        Ok(StmtKind::ExportNamed(specs))
    }

    // ---- expressions ----

    pub fn expression(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Punct(p) => match *p {
                "||" => BinOp::Or,
                "&&" => BinOp::And,
                "==" => BinOp::Eq,
                "!=" => BinOp::Ne,
                "<" => BinOp::Lt,
                "<=" => BinOp::Le,
                ">" => BinOp::Gt,
                ">=" => BinOp::Ge,
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                _ => return None,
            },
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let right = self.binary(op.precedence() + 1)?;
            let span = left.span.to(&right.span);
            left = Expr {
                kind: ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) },
                span,
            };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_punct("!") {
            let start = self.advance().span;
            let operand = self.unary()?;
            let span = start.to(&operand.span);
            return Ok(Expr { kind: ExprKind::Not(Box::new(operand)), span });
        }
        let primary = self.primary()?;
        self.postfix(primary, true)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expression()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn postfix(&mut self, mut expr: Expr, allow_call: bool) -> Result<Expr, ParseError> {
        loop {
            if self.eat_punct(".") {
                let property = self.property_name()?;
                let span = expr.span.to(&self.prev_span());
                expr = Expr { kind: ExprKind::Member { object: Box::new(expr), property }, span };
            } else if self.eat_punct("[") {
                let index = self.expression()?;
                let close = self.expect_punct("]")?;
                let span = expr.span.to(&close);
                expr = Expr {
                    kind: ExprKind::Index { object: Box::new(expr), index: Box::new(index) },
                    span,
                };
            } else if allow_call && self.is_punct("(") {
                let args = self.args()?;
                let span = expr.span.to(&self.prev_span());
                expr = Expr { kind: ExprKind::Call { callee: Box::new(expr), args }, span };
            } else {
                return Ok(expr);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span();
        let tok = self.peek().clone();
        let kind = match tok {
            Tok::Num(n) => {
                self.advance();
                ExprKind::Num(n)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::Punct("(") => {
                self.advance();
                let mut inner = self.expression()?;
                let close = self.expect_punct(")")?;
                // Parentheses leave no trace in the tree but the span covers them.
                inner.span = start.to(&close);
                return Ok(inner);
            }
            Tok::Punct("[") => {
                self.advance();
                let mut items = Vec::new();
                if !self.is_punct("]") {
                    loop {
                        items.push(self.expression()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct("]")?;
                ExprKind::Array(items)
            }
            Tok::Punct("{") => ExprKind::Object(self.object_literal()?),
            Tok::Ident(w) => match w.as_str() {
                "true" => {
                    self.advance();
                    ExprKind::Bool(true)
                }
                "false" => {
                    self.advance();
                    ExprKind::Bool(false)
                }
                "null" => {
                    self.advance();
                    ExprKind::Null
                }
                "this" => {
                    self.advance();
                    ExprKind::This
                }
                "function" => {
                    self.advance();
                    if !self.is_punct("(") {
                        return Err(self.error_here("function expressions cannot be named"));
                    }
                    ExprKind::Function(self.function_rest(start, FunctionKind::Anonymous, None)?)
                }
                "new" => {
                    self.advance();
                    let callee = self.primary()?;
                    if matches!(callee.kind, ExprKind::Function(_)) {
                        return Err(self.error_here("`new` requires a class reference"));
                    }
                    let callee = self.postfix(callee, false)?;
                    let args = self.args()?;
                    ExprKind::New { callee: Box::new(callee), args }
                }
                _ if is_reserved(&w) => {
                    return Err(self.error_here(format!("unexpected keyword `{}`", w)))
                }
                _ => {
                    self.advance();
                    ExprKind::Ident(w)
                }
            },
            other => {
                return Err(self.error_here(format!("expected expression, found {}", Self::describe(&other))))
            }
        };
        Ok(Expr { kind, span: start.to(&self.prev_span()) })
    }

    fn prop_key(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Str(_) => self.string_lit(),
            _ => self.property_name(),
        }
    }

    fn object_literal(&mut self) -> Result<Vec<Prop>, ParseError> {
        self.expect_punct("{")?;
        let mut props = Vec::new();
        if !self.is_punct("}") {
            loop {
                let kstart = self.span();
                let is_accessor = (self.is_word("get") || self.is_word("set"))
                    && !matches!(self.peek_n(1), Tok::Punct(":"));
                if is_accessor {
                    let getter = self.is_word("get");
                    self.advance();
                    let key = self.prop_key()?;
                    let kind = if getter { FunctionKind::Getter } else { FunctionKind::Setter };
                    let def = self.function_rest(kstart, kind, Some(key))?;
                    props.push(if getter { Prop::Getter(def) } else { Prop::Setter(def) });
                } else {
                    let key = self.prop_key()?;
                    self.expect_punct(":")?;
                    let mut value = self.expression()?;
                    if let ExprKind::Function(def) = &mut value.kind {
                        if def.kind == FunctionKind::Anonymous {
                            let d = Rc::make_mut(def);
                            d.kind = FunctionKind::Method;
                            d.name = Some(key.clone());
                        }
                    }
                    props.push(Prop::Value { key, value });
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("}")?;
        Ok(props)
    }
}
