//! Lexing, parsing and canonical rendering of the supported C subset,
//! including `#pragma omp` directives.

mod ast;
mod lexer;
mod parser;
mod pragma;
mod render;

use thiserror::Error;

pub use ast::{AstNode, Attrs, NodeKind, TokenSpan};
pub use lexer::{is_keyword, tokenize, Token, TokenKind, TYPE_KEYWORDS};
pub use parser::fold_pragma;
pub use pragma::{
    parse_omp_pragma, Clause, ClauseKind, Directive, OmpPragma, PragmaError, REDUCTION_OPS,
};
pub use render::{render, render_expr, render_statements};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: expected {expected}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub expected: String,
}

/// Parses a whole source file into a `TranslationUnit`.
pub fn parse_source(source: &str) -> Result<(AstNode, Vec<Token>), SyntaxError> {
    let tokens = tokenize(source)?;
    let unit = parser::Parser::new(&tokens).translation_unit()?;
    Ok((unit, tokens))
}

/// Parses a sequence of statements (no enclosing function) into a
/// `CompoundStmt` whose span covers every token.
pub fn parse_statements(source: &str) -> Result<(AstNode, Vec<Token>), SyntaxError> {
    let tokens = tokenize(source)?;
    let block = parser::Parser::new(&tokens).statement_list()?;
    Ok((block, tokens))
}
