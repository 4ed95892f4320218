//! Tokenizer shared by the HVK, utcc and constraint-text parsers.

use std::fmt;

use crate::error::SyntaxError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Which identifier characters beyond `[A-Za-z0-9_']` are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// Source programs: `#` and `$` are reserved for generated names.
    Source,
    /// Generated text (utcc output, traces): `#` and `$` allowed inside names.
    Generated,
}

// Longest first.
const PUNCT: &[&str] = &[
    "|>", "<|", "||", "!=", "<=", ">=", "==", "![", "?(", "->", "(", ")", "[", "]", "{", "}", "<", ">", ",", ";", ":",
    ".", "|", "!", "?", "=", "+", "-", "*", "&",
];

pub fn tokenize(src: &str, dialect: Dialect) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let n = s
                .parse::<i64>()
                .map_err(|_| SyntaxError::new(start_line, start_col, "integer literal out of range"))?;
            out.push(Token { tok: Tok::Int(n), line: start_line, col: start_col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() {
                let d = chars[i];
                let ok = d.is_alphanumeric() || d == '_' || d == '\'';
                let generated = d == '#' || d == '$';
                if ok || (generated && dialect == Dialect::Generated) {
                    s.push(d);
                    i += 1;
                    col += 1;
                } else if generated {
                    return Err(SyntaxError::new(
                        line,
                        col,
                        format!("`{d}` is reserved for generated names and cannot appear in identifiers"),
                    ));
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), line: start_line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
            return Err(SyntaxError::new(line, col, format!("unexpected character `{c}`")));
        };
        i += p.len();
        col += p.len();
        out.push(Token { tok: Tok::Sym(p), line: start_line, col: start_col });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Cursor over a token vector with the usual peek/expect helpers.
#[derive(Debug, Clone)]
pub struct Cursor {
    toks: Vec<Token>,
    pub pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(p) if *p == s)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        let t = &self.toks[self.pos];
        SyntaxError::new(t.line, t.col, format!("expected {wanted}, found {}", t.tok))
    }

    pub fn error(&self, msg: impl Into<String>) -> SyntaxError {
        let t = &self.toks[self.pos];
        SyntaxError::new(t.line, t.col, msg)
    }
}
