//! Tokenizer for the Solidity subset accepted by the parser.

use super::span::Span;
use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    HexStr,
    Punct,
    Comment,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.kind != TokenKind::Str && self.kind != TokenKind::HexStr && self.text == text
    }
}

const PUNCT: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "**=", "**", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<", ">>", "->", "+", "-", "*", "/", "%",
    "<", ">", "=", "!", "~", "&", "|", "^", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{",
    "}",
];

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
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

/// Split `src` into tokens. Comments are kept as trivia tokens; whitespace is dropped.
/// The returned vector always ends with an `Eof` token.
pub fn tokenize(src: &str, path: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while matches!(cur.peek(), Some(c) if c.is_whitespace()) {
            cur.bump();
        }
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let Some(c) = cur.peek() else { break };
        let kind = if cur.rest().starts_with("//") {
            while matches!(cur.peek(), Some(c) if c != '\n') {
                cur.bump();
            }
            TokenKind::Comment
        } else if cur.rest().starts_with("/*") {
            cur.bump();
            cur.bump();
            loop {
                if cur.rest().starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(SyntaxError::new(path, line, col, "unterminated block comment", vec![]));
                }
            }
            TokenKind::Comment
        } else if (c == 'h' && cur.rest().starts_with("hex\"")) || cur.rest().starts_with("hex'") {
            for _ in 0..3 {
                cur.bump();
            }
            lex_string(&mut cur, path, line, col)?;
            TokenKind::HexStr
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            TokenKind::Ident
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit())) {
            lex_number(&mut cur);
            TokenKind::Number
        } else if c == '"' || c == '\'' {
            lex_string(&mut cur, path, line, col)?;
            TokenKind::Str
        } else if let Some(p) = PUNCT.iter().find(|p| cur.rest().starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            TokenKind::Punct
        } else {
            return Err(SyntaxError::new(path, line, col, &format!("unexpected character '{}'", c), vec![]));
        };
        out.push(Token {
            kind,
            text: src[start..cur.pos].to_string(),
            span: Span { start, end: cur.pos, line, column: col, end_line: cur.line, end_column: cur.col },
        });
    }
    out.push(Token {
        kind: TokenKind::Eof,
        text: String::new(),
        span: Span {
            start: src.len(),
            end: src.len(),
            line: cur.line,
            column: cur.col,
            end_line: cur.line,
            end_column: cur.col,
        },
    });
    Ok(out)
}

fn lex_number(cur: &mut Cursor) {
    if cur.rest().starts_with("0x") || cur.rest().starts_with("0X") {
        cur.bump();
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_hexdigit() || c == '_') {
            cur.bump();
        }
        return;
    }
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '_') {
        cur.bump();
    }
    if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit()) {
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '_') {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e') | Some('E'))
        && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit() || d == '-')
    {
        cur.bump();
        if cur.peek() == Some('-') {
            cur.bump();
        }
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
}

fn lex_string(cur: &mut Cursor, path: &str, line: u32, col: u32) -> Result<(), SyntaxError> {
    let quote = cur.bump().unwrap();
    loop {
        match cur.bump() {
            None | Some('\n') => {
                return Err(SyntaxError::new(path, line, col, "unterminated string literal", vec![]))
            }
            Some('\\') => {
                cur.bump();
            }
            Some(c) if c == quote => return Ok(()),
            Some(_) => {}
        }
    }
}
