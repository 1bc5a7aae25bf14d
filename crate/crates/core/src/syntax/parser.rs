//! Recursive-descent parser for the C subset.

use super::ast::{AstNode, Attrs, NodeKind, TokenSpan};
use super::lexer::{Token, TokenKind, TYPE_KEYWORDS};
use super::SyntaxError;

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

/// Binding power of binary operators; higher binds tighter.
pub(crate) fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

const PREFIX_OPS: &[&str] = &["-", "+", "!", "~", "*", "&", "++", "--"];

pub(crate) struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    pub(crate) fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + off)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn error(&self, expected: &str) -> SyntaxError {
        let (line, col) = match self.peek().or_else(|| self.tokens.last()) {
            Some(t) if !self.at_end() => (t.line, t.col),
            Some(t) => (t.line, t.col + t.lexeme.chars().count() as u32),
            None => (1, 1),
        };
        SyntaxError {
            line,
            col,
            expected: expected.to_string(),
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn expect_identifier(&mut self) -> Result<&'t Token, SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn at_type(&self) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Keyword && TYPE_KEYWORDS.contains(&t.lexeme.as_str()))
    }

    fn node(&self, kind: NodeKind, attrs: Attrs, children: Vec<AstNode>, start: usize) -> AstNode {
        AstNode::new(kind, attrs, children, TokenSpan::new(start, self.pos))
    }

    pub(crate) fn translation_unit(&mut self) -> Result<AstNode, SyntaxError> {
        let mut items = Vec::new();
        while !self.at_end() {
            if self.peek().is_some_and(|t| t.kind == TokenKind::PragmaLine) {
                items.push(self.pragma()?);
                if self.at_end() {
                    return Err(self.error("declaration after pragma"));
                }
                continue;
            }
            items.push(self.external_declaration()?);
        }
        Ok(AstNode::new(
            NodeKind::TranslationUnit,
            Attrs::None,
            items,
            TokenSpan::new(0, self.tokens.len()),
        ))
    }

    /// A bare statement list, as used for extracted loop and context snippets.
    pub(crate) fn statement_list(&mut self) -> Result<AstNode, SyntaxError> {
        let mut stmts = Vec::new();
        while !self.at_end() {
            self.block_item(&mut stmts)?;
        }
        Ok(AstNode::new(
            NodeKind::CompoundStmt,
            Attrs::None,
            stmts,
            TokenSpan::new(0, self.tokens.len()),
        ))
    }

    fn type_words(&mut self) -> Result<String, SyntaxError> {
        let mut words = Vec::new();
        while self.at_type() {
            words.push(self.peek().unwrap().lexeme.clone());
            self.pos += 1;
        }
        if words.is_empty() {
            return Err(self.error("type name"));
        }
        Ok(words.join(" "))
    }

    fn pointers(&mut self) -> u8 {
        let mut n = 0;
        while self.peek().is_some_and(|t| t.is_op("*")) {
            self.pos += 1;
            n += 1;
        }
        n
    }

    fn external_declaration(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let ty = self.type_words()?;
        let save = self.pos;
        let pointers = self.pointers();
        let name_is_fn = self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
            && self.peek_at(1).is_some_and(|t| t.is_punct("("));
        if !name_is_fn {
            self.pos = save;
            let mut decl = self.declaration_rest(start, ty)?;
            self.expect_punct(";")?;
            decl.span.end = self.pos;
            return Ok(decl);
        }
        let name = self.expect_identifier()?.lexeme.clone();
        self.expect_punct("(")?;
        let mut children = Vec::new();
        let void_only = self.peek().is_some_and(|t| t.is_keyword("void"))
            && self.peek_at(1).is_some_and(|t| t.is_punct(")"));
        if void_only {
            self.pos += 1;
        } else if !self.peek().is_some_and(|t| t.is_punct(")")) {
            loop {
                children.push(self.parameter()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        if !self.eat_punct(";") {
            children.push(self.compound()?);
        }
        Ok(self.node(
            NodeKind::FunctionDef,
            Attrs::Function {
                name,
                ret: ty,
                pointers,
            },
            children,
            start,
        ))
    }

    fn parameter(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let ty = self.type_words()?;
        let d = self.declarator(false)?;
        Ok(self.node(NodeKind::Declaration, Attrs::Type(ty), vec![d], start))
    }

    fn declaration_rest(&mut self, start: usize, ty: String) -> Result<AstNode, SyntaxError> {
        let mut decls = vec![self.declarator(true)?];
        while self.eat_punct(",") {
            decls.push(self.declarator(true)?);
        }
        Ok(self.node(NodeKind::Declaration, Attrs::Type(ty), decls, start))
    }

    /// Declaration without the trailing `;`.
    fn declaration(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let ty = self.type_words()?;
        self.declaration_rest(start, ty)
    }

    fn declarator(&mut self, allow_init: bool) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let pointers = self.pointers();
        let name = self.expect_identifier()?.lexeme.clone();
        let mut children = Vec::new();
        while self.eat_punct("[") {
            if self.peek().is_some_and(|t| t.is_punct("]")) {
                children.push(AstNode::empty(self.pos));
            } else {
                children.push(self.expression()?);
            }
            self.expect_punct("]")?;
        }
        let dims = children.len() as u8;
        let mut init = false;
        if allow_init && self.peek().is_some_and(|t| t.is_op("=")) {
            self.pos += 1;
            children.push(self.assignment()?);
            init = true;
        }
        Ok(self.node(
            NodeKind::Declarator,
            Attrs::Declarator {
                name,
                pointers,
                dims,
                init,
            },
            children,
            start,
        ))
    }

    fn pragma(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let tok = self.peek().ok_or_else(|| self.error("pragma"))?;
        self.pos += 1;
        Ok(self.node(
            NodeKind::PragmaDirective,
            Attrs::Pragma(fold_pragma(&tok.lexeme)),
            Vec::new(),
            start,
        ))
    }

    /// Parses one block item into `out`. A pragma is pushed together with the
    /// statement it annotates.
    fn block_item(&mut self, out: &mut Vec<AstNode>) -> Result<(), SyntaxError> {
        if self.peek().is_some_and(|t| t.kind == TokenKind::PragmaLine) {
            out.push(self.pragma()?);
            if self.at_end() || self.peek().is_some_and(|t| t.is_punct("}")) {
                return Err(self.error("statement after pragma"));
            }
            return self.block_item(out);
        }
        out.push(self.statement()?);
        Ok(())
    }

    fn compound(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        loop {
            if self.eat_punct("}") {
                break;
            }
            if self.at_end() {
                return Err(self.error("`}`"));
            }
            self.block_item(&mut items)?;
        }
        Ok(self.node(NodeKind::CompoundStmt, Attrs::None, items, start))
    }

    /// A statement in a position that holds exactly one (loop/branch body).
    /// A pragma there is kept together with its statement in a compound.
    fn sub_statement(&mut self) -> Result<AstNode, SyntaxError> {
        if self.peek().is_some_and(|t| t.kind == TokenKind::PragmaLine) {
            let start = self.pos;
            let mut items = Vec::new();
            self.block_item(&mut items)?;
            return Ok(self.node(NodeKind::CompoundStmt, Attrs::None, items, start));
        }
        self.statement()
    }

    fn statement(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let Some(tok) = self.peek() else {
            return Err(self.error("statement"));
        };
        if tok.is_punct("{") {
            return self.compound();
        }
        if self.at_type() {
            let d = self.declaration()?;
            self.expect_punct(";")?;
            let mut d = d;
            d.span.end = self.pos;
            return Ok(d);
        }
        if tok.is_keyword("for") {
            self.pos += 1;
            self.expect_punct("(")?;
            let init = if self.at_type() {
                self.declaration()?
            } else {
                self.optional_expression(";")?
            };
            self.expect_punct(";")?;
            let cond = self.optional_expression(";")?;
            self.expect_punct(";")?;
            let inc = self.optional_expression(")")?;
            self.expect_punct(")")?;
            let body = self.sub_statement()?;
            return Ok(self.node(NodeKind::ForStmt, Attrs::None, vec![init, cond, inc, body], start));
        }
        if tok.is_keyword("while") {
            self.pos += 1;
            self.expect_punct("(")?;
            let cond = self.expression()?;
            self.expect_punct(")")?;
            let body = self.sub_statement()?;
            return Ok(self.node(NodeKind::WhileStmt, Attrs::None, vec![cond, body], start));
        }
        if tok.is_keyword("if") {
            self.pos += 1;
            self.expect_punct("(")?;
            let cond = self.expression()?;
            self.expect_punct(")")?;
            let then = self.sub_statement()?;
            let mut children = vec![cond, then];
            if self.peek().is_some_and(|t| t.is_keyword("else")) {
                self.pos += 1;
                children.push(self.sub_statement()?);
            }
            return Ok(self.node(NodeKind::IfStmt, Attrs::None, children, start));
        }
        if tok.is_keyword("return") {
            self.pos += 1;
            let mut children = Vec::new();
            if !self.peek().is_some_and(|t| t.is_punct(";")) {
                children.push(self.expression()?);
            }
            self.expect_punct(";")?;
            return Ok(self.node(NodeKind::ReturnStmt, Attrs::None, children, start));
        }
        let expr = self.optional_expression(";")?;
        self.expect_punct(";")?;
        Ok(self.node(NodeKind::ExprStmt, Attrs::None, vec![expr], start))
    }

    fn optional_expression(&mut self, terminator: &str) -> Result<AstNode, SyntaxError> {
        if self.peek().is_some_and(|t| t.is_punct(terminator)) {
            Ok(AstNode::empty(self.pos))
        } else {
            self.expression()
        }
    }

    fn expression(&mut self) -> Result<AstNode, SyntaxError> {
        self.assignment()
    }

    fn assignment(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let lhs = self.binary(1)?;
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && ASSIGN_OPS.contains(&t.lexeme.as_str()) {
                let op = t.lexeme.clone();
                self.pos += 1;
                let rhs = self.assignment()?;
                return Ok(self.node(NodeKind::Assign, Attrs::Op(op), vec![lhs, rhs], start));
            }
        }
        Ok(lhs)
    }

    fn binary(&mut self, min_prec: u8) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let mut lhs = self.unary()?;
        loop {
            let Some(t) = self.peek() else { break };
            if t.kind != TokenKind::Operator {
                break;
            }
            let Some(prec) = binary_precedence(&t.lexeme) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            let op = t.lexeme.clone();
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = self.node(NodeKind::BinaryOp, Attrs::Op(op), vec![lhs, rhs], start);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && PREFIX_OPS.contains(&t.lexeme.as_str()) {
                let op = t.lexeme.clone();
                self.pos += 1;
                let operand = self.unary()?;
                return Ok(self.node(NodeKind::UnaryOp, Attrs::Op(op), vec![operand], start));
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let mut expr = self.primary()?;
        loop {
            let Some(t) = self.peek() else { break };
            if t.is_punct("[") {
                self.pos += 1;
                let idx = self.expression()?;
                self.expect_punct("]")?;
                expr = self.node(NodeKind::ArrayIndex, Attrs::None, vec![expr, idx], start);
            } else if t.is_punct("(") && expr.kind == NodeKind::Identifier {
                self.pos += 1;
                let mut args = Vec::new();
                if !self.peek().is_some_and(|t| t.is_punct(")")) {
                    loop {
                        args.push(self.assignment()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                let name = expr.name().unwrap_or_default().to_string();
                expr = self.node(NodeKind::Call, Attrs::Name(name), args, start);
            } else if t.is_op("++") || t.is_op("--") {
                let op = t.lexeme.clone();
                self.pos += 1;
                expr = self.node(NodeKind::PostfixOp, Attrs::Op(op), vec![expr], start);
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn primary(&mut self) -> Result<AstNode, SyntaxError> {
        let start = self.pos;
        let Some(t) = self.peek() else {
            return Err(self.error("expression"));
        };
        match t.kind {
            TokenKind::Identifier => {
                self.pos += 1;
                Ok(self.node(NodeKind::Identifier, Attrs::Name(t.lexeme.clone()), Vec::new(), start))
            }
            TokenKind::Number | TokenKind::StringLiteral | TokenKind::CharLiteral => {
                self.pos += 1;
                Ok(self.node(NodeKind::Constant, Attrs::Literal(t.lexeme.clone()), Vec::new(), start))
            }
            TokenKind::Punctuation if t.lexeme == "(" => {
                self.pos += 1;
                let inner = self.expression()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            _ => Err(self.error("expression")),
        }
    }
}

/// Joins backslash-continued pragma lines and collapses runs of whitespace.
pub fn fold_pragma(raw: &str) -> String {
    raw.replace("\\\r\n", " ")
        .replace("\\\n", " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
