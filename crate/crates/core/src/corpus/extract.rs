//! Loop extraction and labeling from a parsed source file.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::syntax::{
    parse_omp_pragma, parse_source, render, render_statements, AstNode, Attrs, ClauseKind,
    NodeKind, OmpPragma, Token, TokenSpan,
};

use super::sample::{Labels, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ParseError,
    EmptyLoop,
    BarrierCriticalAtomic,
    NestedDuplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub path: String,
    pub line: u32,
    pub reason: RejectReason,
}

/// A `for` statement found in a function, with the pragma that annotates it.
#[derive(Debug, Clone, Copy)]
pub struct LoopSite<'a> {
    pub node: &'a AstNode,
    pub pragma: Option<&'a AstNode>,
    pub function: &'a AstNode,
}

/// Every `for` statement inside a function body, at any nesting depth, in
/// program order.
pub fn find_loops(unit: &AstNode) -> Vec<LoopSite<'_>> {
    fn go<'a>(node: &'a AstNode, function: &'a AstNode, out: &mut Vec<LoopSite<'a>>) {
        for (i, child) in node.children.iter().enumerate() {
            if child.kind == NodeKind::ForStmt {
                let pragma = i
                    .checked_sub(1)
                    .map(|p| &node.children[p])
                    .filter(|p| p.kind == NodeKind::PragmaDirective);
                out.push(LoopSite {
                    node: child,
                    pragma,
                    function,
                });
            }
            go(child, function, out);
        }
    }
    let mut out = Vec::new();
    for item in &unit.children {
        if item.kind == NodeKind::FunctionDef {
            go(item, item, &mut out);
        }
    }
    out
}

fn strip_pragmas(node: &AstNode) -> AstNode {
    let mut n = node.clone();
    n.walk_mut(&mut |m| m.children.retain(|c| c.kind != NodeKind::PragmaDirective));
    n
}

/// Canonical text of a loop with any nested OpenMP directives removed.
pub fn loop_code(site: &LoopSite<'_>) -> String {
    render(&strip_pragmas(site.node))
}

fn is_empty_body(body: &AstNode) -> bool {
    match body.kind {
        NodeKind::ExprStmt => body.children.iter().all(AstNode::is_empty_marker),
        NodeKind::CompoundStmt => body
            .children
            .iter()
            .all(|c| c.kind == NodeKind::PragmaDirective || is_empty_body(c)),
        _ => false,
    }
}

/// Variable names appearing anywhere in the subtree, callee names excluded.
pub fn variables_in(node: &AstNode) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    node.walk(&mut |n| match (&n.kind, &n.attrs) {
        (NodeKind::Identifier, Attrs::Name(name)) => {
            vars.insert(name.clone());
        }
        (NodeKind::Declarator, Attrs::Declarator { name, .. }) => {
            vars.insert(name.clone());
        }
        _ => {}
    });
    vars
}

fn store_root(lhs: &AstNode) -> Option<&str> {
    match lhs.kind {
        NodeKind::Identifier => lhs.name(),
        NodeKind::ArrayIndex => store_root(&lhs.children[0]),
        NodeKind::UnaryOp if lhs.op() == Some("*") => store_root(&lhs.children[0]),
        _ => None,
    }
}

/// Extended scope of a loop: from the enclosing function and in program
/// order, the declarations of the variables used in the loop and every
/// assignment statement before the loop whose target is used in it.
pub fn context_statements(site: &LoopSite<'_>) -> Vec<AstNode> {
    let used = variables_in(site.node);
    let loop_start = site.node.span.start;
    let mut picked: Vec<AstNode> = Vec::new();

    site.function.walk(&mut |n| {
        if n.span.end > loop_start || n.span.is_empty() {
            return;
        }
        match n.kind {
            NodeKind::Declaration => {
                let keep: Vec<AstNode> = n
                    .children
                    .iter()
                    .filter(|d| d.name().is_some_and(|name| used.contains(name)))
                    .cloned()
                    .collect();
                if !keep.is_empty() {
                    picked.push(AstNode::new(
                        NodeKind::Declaration,
                        n.attrs.clone(),
                        keep,
                        n.span,
                    ));
                }
            }
            NodeKind::ExprStmt => {
                if let Some(e) = n.children.first() {
                    let target = (e.kind == NodeKind::Assign)
                        .then(|| store_root(&e.children[0]))
                        .flatten();
                    if target.is_some_and(|t| used.contains(t)) {
                        picked.push(n.clone());
                    }
                }
            }
            _ => {}
        }
    });
    picked.sort_by_key(|n| n.span.start);
    picked
}

pub fn context_code(site: &LoopSite<'_>) -> String {
    render_statements(&context_statements(site))
}

/// Labels implied by the annotating pragma of a loop.
pub fn labels_for(pragma: Option<&OmpPragma>) -> Labels {
    match pragma {
        Some(p) if p.directive.is_worksharing_loop() => Labels::new(
            true,
            p.has_clause(ClauseKind::Private),
            p.has_clause(ClauseKind::Reduction),
        ),
        _ => Labels::default(),
    }
}

fn line_of(tokens: &[Token], span: TokenSpan) -> u32 {
    tokens.get(span.start).map(|t| t.line).unwrap_or(1)
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub samples: Vec<Sample>,
    pub rejects: Vec<Reject>,
}

/// Extracts labeled samples from one source file. `path` is recorded
/// verbatim in samples and rejects.
pub fn extract_samples(path: &str, source: &str, with_scope: bool) -> Extraction {
    let mut out = Extraction::default();
    let reject = |line: u32, reason: RejectReason| Reject {
        path: path.to_string(),
        line,
        reason,
    };
    let (unit, tokens) = match parse_source(source) {
        Ok(p) => p,
        Err(e) => {
            out.rejects.push(reject(e.line, RejectReason::ParseError));
            return out;
        }
    };

    let mut seen: HashSet<String> = HashSet::new();
    for site in find_loops(&unit) {
        let line = line_of(&tokens, site.node.span);

        let own = match site.pragma.map(|p| parse_omp_pragma(p.pragma_text().unwrap_or_default())) {
            Some(Ok(p)) => Some(p),
            Some(Err(_)) => {
                out.rejects.push(reject(line, RejectReason::ParseError));
                continue;
            }
            None => None,
        };

        let mut inner = Vec::new();
        site.node.walk(&mut |n| {
            if let Some(text) = n.pragma_text() {
                inner.push(parse_omp_pragma(text));
            }
        });
        if inner.iter().any(Result::is_err) {
            out.rejects.push(reject(line, RejectReason::ParseError));
            continue;
        }
        let uses_sync = own.iter().chain(inner.iter().flatten()).any(|p| p.directive.is_synchronization());
        if uses_sync {
            out.rejects.push(reject(line, RejectReason::BarrierCriticalAtomic));
            continue;
        }
        if is_empty_body(&site.node.children[3]) {
            out.rejects.push(reject(line, RejectReason::EmptyLoop));
            continue;
        }

        let labels = labels_for(own.as_ref());
        let pragma_raw = labels.pragma.then(|| own.as_ref().map(|p| p.raw.clone())).flatten();
        let context = if with_scope {
            context_code(&site)
        } else {
            String::new()
        };
        let sample = match Sample::new(path, loop_code(&site), context, pragma_raw, labels) {
            Ok(mut s) => {
                s.offset = site.node.span.start;
                s
            }
            Err(_) => {
                out.rejects.push(reject(line, RejectReason::ParseError));
                continue;
            }
        };
        if !seen.insert(sample.id.clone()) {
            out.rejects.push(reject(line, RejectReason::NestedDuplicate));
            continue;
        }
        out.samples.push(sample);
    }
    out
}
