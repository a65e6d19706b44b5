use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::Span;
use super::ParseError;

pub const STUB_IGNORE_DIRECTIVE: &str = "// @stub:ignore";

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub struct Lexed {
    pub tokens: Vec<Token>,
    /// Lines holding exactly the stub-ignore directive.
    pub directive_lines: BTreeSet<u32>,
}

// Longest first so that `==` wins over `=`.
const PUNCT: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]", ",", ";", ":", ".", "=",
    "+", "-", "*", "/", "<", ">", "!",
];

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 0;
        } else {
            self.col += c.len_utf8() as u32;
        }
        Some(c)
    }

    fn mark(&self) -> (u32, u32, u32) {
        (self.pos as u32, self.line, self.col)
    }

    fn span_from(&self, m: (u32, u32, u32)) -> Span {
        Span {
            start: m.0,
            end: self.pos as u32,
            start_line: m.1,
            start_col: m.2,
            end_line: self.line,
            end_col: self.col,
        }
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError { line: self.line, col: self.col, message: message.into() }
    }
}

pub fn lex(src: &str) -> Result<Lexed, ParseError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 0 };
    let mut tokens = Vec::new();
    let mut directive_lines = BTreeSet::new();
    // Whether only whitespace has been seen on the current line so far.
    let mut line_blank = true;

    while let Some(c) = cur.peek() {
        if c == '\n' {
            cur.bump();
            line_blank = true;
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('/') {
            let line = cur.line;
            let start = cur.pos;
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            let text = src[start..cur.pos].trim_end_matches('\r');
            if line_blank && text == STUB_IGNORE_DIRECTIVE {
                directive_lines.insert(line);
            }
            continue;
        }
        line_blank = false;
        let m = cur.mark();
        if c.is_ascii_digit() {
            let start = cur.pos;
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
                while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                    cur.bump();
                }
            }
            let value: f64 =
                src[start..cur.pos].parse().map_err(|_| cur.error("invalid number literal"))?;
            tokens.push(Token { tok: Tok::Num(value), span: cur.span_from(m) });
            continue;
        }
        if is_ident_start(c) {
            let start = cur.pos;
            while cur.peek().is_some_and(is_ident_char) {
                cur.bump();
            }
            let word = String::from(&src[start..cur.pos]);
            tokens.push(Token { tok: Tok::Ident(word), span: cur.span_from(m) });
            continue;
        }
        if c == '"' {
            cur.bump();
            let mut value = String::new();
            loop {
                match cur.bump() {
                    None | Some('\n') => return Err(cur.error("unterminated string literal")),
                    Some('"') => break,
                    Some('\\') => match cur.bump() {
                        Some('"') => value.push('"'),
                        Some('\\') => value.push('\\'),
                        Some('n') => value.push('\n'),
                        _ => return Err(cur.error("unsupported escape sequence")),
                    },
                    Some(c) => value.push(c),
                }
            }
            tokens.push(Token { tok: Tok::Str(value), span: cur.span_from(m) });
            continue;
        }
        let rest = &src[cur.pos..];
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    cur.bump();
                }
                tokens.push(Token { tok: Tok::Punct(p), span: cur.span_from(m) });
            }
            None => return Err(cur.error("unexpected character")),
        }
    }
    let m = cur.mark();
    tokens.push(Token { tok: Tok::Eof, span: cur.span_from(m) });
    Ok(Lexed { tokens, directive_lines })
}
