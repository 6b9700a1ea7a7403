//! Tokenizer for `.scn` scenario scripts.
//!
//! The alphabet is deliberately small: ASCII letters, digits, `_`, `-`, `.`,
//! the punctuation `( ) [ ] , = < >`, whitespace, and `#` line comments.
//! Every other character becomes an `E_LEX_CHAR` diagnostic and is skipped,
//! so tokenizing never fails outright.
//!
//! Identifiers may contain interior hyphens (`rear-end`, `t-bone`) as long as
//! each hyphen is followed by a letter. A `-` directly before a digit starts a
//! negative number literal.

use super::diagnostics::{Code, Diagnostic, Span};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Param,
    Behavior,
    New,
    At,
    Ahead,
    Of,
    Behind,
    Left,
    Right,
    On,
    Lane,
    By,
    With,
    When,
    Require,
    Terminate,
}

impl Keyword {
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Param => "param",
            Keyword::Behavior => "behavior",
            Keyword::New => "new",
            Keyword::At => "at",
            Keyword::Ahead => "ahead",
            Keyword::Of => "of",
            Keyword::Behind => "behind",
            Keyword::Left => "left",
            Keyword::Right => "right",
            Keyword::On => "on",
            Keyword::Lane => "lane",
            Keyword::By => "by",
            Keyword::With => "with",
            Keyword::When => "when",
            Keyword::Require => "require",
            Keyword::Terminate => "terminate",
        }
    }

    fn lookup(word: &str) -> Option<Keyword> {
        Some(match word {
            "param" => Keyword::Param,
            "behavior" => Keyword::Behavior,
            "new" => Keyword::New,
            "at" => Keyword::At,
            "ahead" => Keyword::Ahead,
            "of" => Keyword::Of,
            "behind" => Keyword::Behind,
            "left" => Keyword::Left,
            "right" => Keyword::Right,
            "on" => Keyword::On,
            "lane" => Keyword::Lane,
            "by" => Keyword::By,
            "with" => Keyword::With,
            "when" => Keyword::When,
            "require" => Keyword::Require,
            "terminate" => Keyword::Terminate,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    Keyword(Keyword),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Lt,
    Gt,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Number(v) => write!(f, "number `{v:?}`"),
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::LBracket => f.write_str("`[`"),
            TokenKind::RBracket => f.write_str("`]`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Eq => f.write_str("`=`"),
            TokenKind::Lt => f.write_str("`<`"),
            TokenKind::Gt => f.write_str("`>`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

/// Tokens plus any lexical diagnostics, and the source length so later
/// stages can build an end-of-input span.
#[derive(Debug, Clone, Default)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
    pub eof: Span,
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
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, mark: (usize, u32, u32)) -> Span {
        Span {
            start: mark.0,
            end: self.pos,
            line: mark.1,
            col: mark.2,
            end_line: self.line,
            end_col: self.col,
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn tokenize(text: &str) -> TokenStream {
    let mut cur = Cursor { src: text, pos: 0, line: 1, col: 1 };
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();

    while let Some(c) = cur.peek() {
        let mark = cur.mark();
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                cur.bump();
            }
            '#' => {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            }
            '(' | ')' | '[' | ']' | ',' | '=' | '<' | '>' => {
                cur.bump();
                let kind = match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    '=' => TokenKind::Eq,
                    '<' => TokenKind::Lt,
                    _ => TokenKind::Gt,
                };
                tokens.push(Token { kind, span: cur.span_from(mark) });
            }
            c if is_ident_start(c) => {
                loop {
                    match cur.peek() {
                        Some(c) if is_ident_continue(c) => {
                            cur.bump();
                        }
                        Some('-') if cur.peek_at(1).is_some_and(|n| n.is_ascii_alphabetic()) => {
                            cur.bump();
                        }
                        _ => break,
                    }
                }
                let word = &text[mark.0..cur.pos];
                let kind = match Keyword::lookup(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.to_string()),
                };
                tokens.push(Token { kind, span: cur.span_from(mark) });
            }
            c if c.is_ascii_digit() || (c == '-' && cur.peek_at(1).is_some_and(|n| n.is_ascii_digit())) => {
                match lex_number(&mut cur) {
                    Ok(v) => tokens.push(Token { kind: TokenKind::Number(v), span: cur.span_from(mark) }),
                    Err(msg) => diagnostics.push(Diagnostic::new(Code::LexNumber, cur.span_from(mark), msg)),
                }
            }
            other => {
                cur.bump();
                diagnostics.push(Diagnostic::new(
                    Code::LexChar,
                    cur.span_from(mark),
                    format!("illegal character {other:?}"),
                ));
            }
        }
    }

    let eof = Span {
        start: cur.pos,
        end: cur.pos,
        line: cur.line,
        col: cur.col,
        end_line: cur.line,
        end_col: cur.col,
    };
    TokenStream { tokens, diagnostics, eof }
}

/// `-?digits(.digits)?([eE][+-]?digits)?`, then any trailing identifier
/// characters are swallowed into the (rejected) literal.
fn lex_number(cur: &mut Cursor<'_>) -> Result<f64, String> {
    let start = cur.pos;
    let mut malformed = false;
    if cur.peek() == Some('-') {
        cur.bump();
    }
    let digits = |cur: &mut Cursor<'_>| {
        let mut n = 0;
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
            n += 1;
        }
        n
    };
    digits(cur);
    if cur.peek() == Some('.') {
        cur.bump();
        if digits(cur) == 0 {
            malformed = true;
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        if digits(cur) == 0 {
            malformed = true;
        }
    }
    while cur.peek().is_some_and(|c| is_ident_continue(c) || c == '.') {
        cur.bump();
        malformed = true;
    }
    let text = &cur.src[start..cur.pos];
    if malformed {
        return Err(format!("malformed number literal `{text}`"));
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("number literal `{text}` is not a finite value")),
    }
}
