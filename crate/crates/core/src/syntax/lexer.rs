//! Tokenizer for the C subset.
//!
//! Comments and preprocessor lines are consumed here rather than in a separate
//! pass so that every token keeps its original line and column. The only
//! preprocessor lines that survive are `#pragma omp ...`, which become a single
//! [`TokenKind::PragmaLine`] token spanning the whole logical line.

use serde::{Deserialize, Serialize};

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLiteral,
    CharLiteral,
    Operator,
    Punctuation,
    PragmaLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// 1-based.
    pub line: u32,
    /// 1-based, counted in characters.
    pub col: u32,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }

    pub fn is_punct(&self, lexeme: &str) -> bool {
        self.is(TokenKind::Punctuation, lexeme)
    }

    pub fn is_op(&self, lexeme: &str) -> bool {
        self.is(TokenKind::Operator, lexeme)
    }

    pub fn is_keyword(&self, lexeme: &str) -> bool {
        self.is(TokenKind::Keyword, lexeme)
    }
}

pub const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "const",
    "static",
];

const STMT_KEYWORDS: &[&str] = &["if", "else", "for", "while", "return"];

pub fn is_keyword(word: &str) -> bool {
    TYPE_KEYWORDS.contains(&word) || STMT_KEYWORDS.contains(&word)
}

// Longest match first.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~",
    "&", "|", "^", "?", ":", ".",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ','];

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    /// True while only whitespace has been seen on the current line.
    at_line_start: bool,
}

impl Cursor {
    fn new(src: &str) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            at_line_start: true,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
            self.at_line_start = true;
        } else {
            self.col += 1;
            if !c.is_whitespace() {
                self.at_line_start = false;
            }
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(i, c)| self.peek_at(i) == Some(c))
    }

    fn error(&self, expected: &str) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col,
            expected: expected.to_string(),
        }
    }

    /// Reads the rest of a logical line (honouring backslash continuations)
    /// without consuming the terminating newline.
    fn logical_line(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            if c == '\\' && self.peek_at(1) == Some('\n') {
                out.push(c);
                self.bump();
                out.push('\n');
                self.bump();
                continue;
            }
            if c == '\\' && self.peek_at(1) == Some('\r') && self.peek_at(2) == Some('\n') {
                out.push(c);
                self.bump();
                self.bump();
                out.push('\n');
                self.bump();
                continue;
            }
            out.push(c);
            self.bump();
        }
        out
    }
}

fn is_omp_pragma(line: &str) -> bool {
    let rest = line.trim_start().strip_prefix('#').unwrap_or("").trim_start();
    let Some(rest) = rest.strip_prefix("pragma") else {
        return false;
    };
    if !rest.starts_with(|c: char| c.is_whitespace()) {
        return false;
    }
    let rest = rest.trim_start();
    rest.strip_prefix("omp")
        .is_some_and(|r| r.is_empty() || r.starts_with(|c: char| c.is_whitespace() || c == '\\'))
}

/// Removes a trailing `//` or `/* */` comment from a pragma line.
fn strip_line_comment(line: &str) -> &str {
    let cut = [line.find("//"), line.find("/*")]
        .into_iter()
        .flatten()
        .min();
    match cut {
        Some(i) => line[..i].trim_end(),
        None => line.trim_end(),
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor::new(src);
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            let (line, col) = (cur.line, cur.col);
            cur.bump();
            cur.bump();
            loop {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(SyntaxError {
                        line,
                        col,
                        expected: "end of block comment".into(),
                    });
                }
            }
            continue;
        }
        let (line, col) = (cur.line, cur.col);
        if c == '#' && cur.at_line_start {
            let text = cur.logical_line();
            if is_omp_pragma(&text) {
                tokens.push(Token {
                    kind: TokenKind::PragmaLine,
                    lexeme: strip_line_comment(&text).to_string(),
                    line,
                    col,
                });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let kind = if is_keyword(&word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token {
                kind,
                lexeme: word,
                line,
                col,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            let mut num = String::new();
            let hex = cur.starts_with("0x") || cur.starts_with("0X");
            while let Some(c) = cur.peek() {
                let exp_sign = !hex
                    && (c == '+' || c == '-')
                    && num.ends_with(['e', 'E'])
                    && num.chars().next().is_some_and(|f| f.is_ascii_digit() || f == '.');
                if c.is_ascii_alphanumeric() || c == '.' || c == '_' || exp_sign {
                    num.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                lexeme: num,
                line,
                col,
            });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let mut lit = String::new();
            lit.push(quote);
            cur.bump();
            loop {
                match cur.bump() {
                    Some('\\') => {
                        lit.push('\\');
                        match cur.bump() {
                            Some(e) => lit.push(e),
                            None => return Err(cur.error("closing quote")),
                        }
                    }
                    Some('\n') | None => return Err(cur.error("closing quote")),
                    Some(ch) => {
                        lit.push(ch);
                        if ch == quote {
                            break;
                        }
                    }
                }
            }
            let kind = if quote == '"' {
                TokenKind::StringLiteral
            } else {
                TokenKind::CharLiteral
            };
            tokens.push(Token {
                kind,
                lexeme: lit,
                line,
                col,
            });
            continue;
        }
        if PUNCTUATION.contains(&c) {
            cur.bump();
            tokens.push(Token {
                kind: TokenKind::Punctuation,
                lexeme: c.to_string(),
                line,
                col,
            });
            continue;
        }
        if let Some(op) = OPERATORS.iter().find(|op| cur.starts_with(op)) {
            for _ in 0..op.chars().count() {
                cur.bump();
            }
            tokens.push(Token {
                kind: TokenKind::Operator,
                lexeme: op.to_string(),
                line,
                col,
            });
            continue;
        }
        return Err(cur.error("a token"));
    }
    Ok(tokens)
}
