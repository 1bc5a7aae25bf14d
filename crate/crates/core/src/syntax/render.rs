//! Canonical source rendering: single spaces, one statement per line, braces
//! around every loop and branch body, no indentation.

use super::ast::{AstNode, Attrs, NodeKind};
use super::parser::binary_precedence;

const PREC_ASSIGN: u8 = 0;
const PREC_UNARY: u8 = 11;
const PREC_POSTFIX: u8 = 12;
const PREC_PRIMARY: u8 = 13;

fn precedence(n: &AstNode) -> u8 {
    match n.kind {
        NodeKind::Assign => PREC_ASSIGN,
        NodeKind::BinaryOp => n.op().and_then(binary_precedence).unwrap_or(PREC_PRIMARY),
        NodeKind::UnaryOp => PREC_UNARY,
        NodeKind::PostfixOp | NodeKind::ArrayIndex | NodeKind::Call => PREC_POSTFIX,
        _ => PREC_PRIMARY,
    }
}

pub fn render(node: &AstNode) -> String {
    let mut out = String::new();
    write_node(node, &mut out);
    out
}

/// Renders the children of a statement list on separate lines, without the
/// surrounding braces.
pub fn render_statements(stmts: &[AstNode]) -> String {
    stmts.iter().map(render).collect::<Vec<_>>().join("\n")
}

fn write_node(n: &AstNode, out: &mut String) {
    match n.kind {
        NodeKind::TranslationUnit => {
            out.push_str(&render_statements(&n.children));
        }
        NodeKind::FunctionDef => {
            let Attrs::Function {
                name,
                ret,
                pointers,
            } = &n.attrs
            else {
                return;
            };
            out.push_str(ret);
            out.push(' ');
            out.push_str(&"*".repeat(*pointers as usize));
            out.push_str(name);
            out.push('(');
            let (params, body) = match n.children.last() {
                Some(b) if b.kind == NodeKind::CompoundStmt => {
                    (&n.children[..n.children.len() - 1], Some(b))
                }
                _ => (&n.children[..], None),
            };
            let params: Vec<String> = params.iter().map(render_declaration_core).collect();
            out.push_str(&params.join(", "));
            out.push(')');
            match body {
                Some(b) => {
                    out.push(' ');
                    write_node(b, out);
                }
                None => out.push(';'),
            }
        }
        NodeKind::Declaration => {
            out.push_str(&render_declaration_core(n));
            out.push(';');
        }
        NodeKind::Declarator => out.push_str(&render_declarator(n)),
        NodeKind::CompoundStmt => {
            if n.children.is_empty() {
                out.push_str("{\n}");
            } else {
                out.push_str("{\n");
                out.push_str(&render_statements(&n.children));
                out.push_str("\n}");
            }
        }
        NodeKind::ForStmt => {
            let init = match &n.children[0] {
                d if d.kind == NodeKind::Declaration => render_declaration_core(d),
                e => render_expr(e),
            };
            out.push_str(&format!(
                "for ({}; {}; {}) ",
                init,
                render_expr(&n.children[1]),
                render_expr(&n.children[2])
            ));
            write_body(&n.children[3], out);
        }
        NodeKind::WhileStmt => {
            out.push_str(&format!("while ({}) ", render_expr(&n.children[0])));
            write_body(&n.children[1], out);
        }
        NodeKind::IfStmt => {
            out.push_str(&format!("if ({}) ", render_expr(&n.children[0])));
            write_body(&n.children[1], out);
            if let Some(e) = n.children.get(2) {
                out.push_str(" else ");
                if e.kind == NodeKind::IfStmt {
                    write_node(e, out);
                } else {
                    write_body(e, out);
                }
            }
        }
        NodeKind::ExprStmt => {
            if let Some(e) = n.children.first() {
                out.push_str(&render_expr(e));
            }
            out.push(';');
        }
        NodeKind::ReturnStmt => match n.children.first() {
            Some(e) => out.push_str(&format!("return {};", render_expr(e))),
            None => out.push_str("return;"),
        },
        NodeKind::PragmaDirective => {
            out.push_str(n.pragma_text().unwrap_or_default());
        }
        _ => out.push_str(&render_expr(n)),
    }
}

fn write_body(body: &AstNode, out: &mut String) {
    if body.kind == NodeKind::CompoundStmt {
        write_node(body, out);
    } else {
        out.push_str("{\n");
        write_node(body, out);
        out.push_str("\n}");
    }
}

fn render_declaration_core(n: &AstNode) -> String {
    let ty = match &n.attrs {
        Attrs::Type(t) => t.as_str(),
        _ => "",
    };
    let decls: Vec<String> = n.children.iter().map(render_declarator).collect();
    format!("{} {}", ty, decls.join(", "))
}

fn render_declarator(n: &AstNode) -> String {
    let Attrs::Declarator { name, pointers, .. } = &n.attrs else {
        return String::new();
    };
    let mut s = "*".repeat(*pointers as usize);
    s.push_str(name);
    for d in n.declarator_dims() {
        s.push('[');
        s.push_str(&render_expr(d));
        s.push(']');
    }
    if let Some(init) = n.declarator_init() {
        s.push_str(" = ");
        s.push_str(&render_expr(init));
    }
    s
}

fn wrap(child: &AstNode, parens: bool) -> String {
    let s = render_expr(child);
    if parens {
        format!("({s})")
    } else {
        s
    }
}

pub fn render_expr(n: &AstNode) -> String {
    match (&n.kind, &n.attrs) {
        (NodeKind::Empty, _) => String::new(),
        (NodeKind::Identifier, Attrs::Name(name)) => name.clone(),
        (NodeKind::Constant, Attrs::Literal(lit)) => lit.clone(),
        (NodeKind::Assign, Attrs::Op(op)) => {
            let lhs = wrap(&n.children[0], precedence(&n.children[0]) < PREC_UNARY);
            let rhs = render_expr(&n.children[1]);
            format!("{lhs} {op} {rhs}")
        }
        (NodeKind::BinaryOp, Attrs::Op(op)) => {
            let p = precedence(n);
            let lhs = wrap(&n.children[0], precedence(&n.children[0]) < p);
            let rhs = wrap(&n.children[1], precedence(&n.children[1]) <= p);
            format!("{lhs} {op} {rhs}")
        }
        (NodeKind::UnaryOp, Attrs::Op(op)) => {
            let operand = wrap(&n.children[0], precedence(&n.children[0]) < PREC_UNARY);
            let clash = operand
                .chars()
                .next()
                .is_some_and(|c| op.ends_with(c) && matches!(c, '+' | '-' | '&'));
            if clash {
                format!("{op} {operand}")
            } else {
                format!("{op}{operand}")
            }
        }
        (NodeKind::PostfixOp, Attrs::Op(op)) => {
            let operand = wrap(&n.children[0], precedence(&n.children[0]) < PREC_POSTFIX);
            format!("{operand}{op}")
        }
        (NodeKind::ArrayIndex, _) => {
            let base = wrap(&n.children[0], precedence(&n.children[0]) < PREC_POSTFIX);
            format!("{}[{}]", base, render_expr(&n.children[1]))
        }
        (NodeKind::Call, Attrs::Name(name)) => {
            let args: Vec<String> = n.children.iter().map(render_expr).collect();
            format!("{}({})", name, args.join(", "))
        }
        _ => {
            let mut out = String::new();
            write_node(n, &mut out);
            out
        }
    }
}
