//! Data-flow graph over variable occurrences.
//!
//! Nodes are identifier occurrences in variable position; an edge
//! `(to, from)` records that the value at `to` comes from `from`. Edges are
//! computed with a conservative reaching-definitions pass:
//!
//! * `x = e` makes a def node for `x` fed by every value source in `e`;
//!   compound assignments and `++`/`--` are also fed by the reaching defs of
//!   `x`.
//! * A use is fed by every definition that currently reaches it; `if`
//!   branches merge by union.
//! * Loops are re-analyzed with the defs exported by the body merged into the
//!   entry state until that state stops growing, which captures back-edges.
//! * Array stores define the whole array; subscripts are ordinary uses.
//! * Declarations create def nodes; call arguments are uses, callee names are
//!   not variables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::syntax::{AstNode, NodeKind, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccurrenceKind {
    Def,
    Use,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfgNode {
    pub node_id: usize,
    pub var_name: String,
    pub code_token_index: usize,
    pub occurrence_kind: OccurrenceKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFlowGraph {
    pub nodes: Vec<DfgNode>,
    /// `(to, from)` pairs, sorted and unique.
    pub edges: Vec<(usize, usize)>,
}

/// Wire form stored in corpus records: `{"nodes": [[name, token_index], ...],
/// "edges": [[to, from], ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedDfg {
    pub nodes: Vec<(String, usize)>,
    pub edges: Vec<(usize, usize)>,
}

impl SerializedDfg {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|(n, _)| n.as_str())
    }

    pub fn alignment(&self) -> Vec<usize> {
        self.nodes.iter().map(|(_, i)| *i).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl DataFlowGraph {
    pub fn serialize(&self) -> SerializedDfg {
        let (names, alignment, edges) = serialize_dfg(self);
        SerializedDfg {
            nodes: names.into_iter().zip(alignment).collect(),
            edges,
        }
    }
}

/// Names in node order, the code-token index of each node, and the edges.
pub fn serialize_dfg(g: &DataFlowGraph) -> (Vec<String>, Vec<usize>, Vec<(usize, usize)>) {
    let names = g.nodes.iter().map(|n| n.var_name.clone()).collect();
    let alignment = g.nodes.iter().map(|n| n.code_token_index).collect();
    (names, alignment, g.edges.clone())
}

type DefState = BTreeMap<String, BTreeSet<usize>>;

fn merge(into: &mut DefState, other: &DefState) {
    for (var, defs) in other {
        into.entry(var.clone()).or_default().extend(defs.iter().copied());
    }
}

#[derive(Default)]
struct Builder {
    /// token index -> (name, kind)
    nodes: BTreeMap<usize, (String, OccurrenceKind)>,
    /// (to token, from token)
    edges: BTreeSet<(usize, usize)>,
    state: DefState,
}

impl Builder {
    fn add_node(&mut self, tok: usize, name: &str, kind: OccurrenceKind) {
        self.nodes.entry(tok).or_insert_with(|| (name.to_string(), kind));
    }

    fn add_edge(&mut self, to: usize, from: usize) {
        if to != from {
            self.edges.insert((to, from));
        }
    }

    fn reaching(&self, name: &str) -> Vec<usize> {
        self.state
            .get(name)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    fn use_var(&mut self, tok: usize, name: &str) -> usize {
        self.add_node(tok, name, OccurrenceKind::Use);
        for d in self.reaching(name) {
            self.add_edge(tok, d);
        }
        tok
    }

    fn define(&mut self, tok: usize, name: &str, sources: &[usize], accumulate: bool) {
        self.add_node(tok, name, OccurrenceKind::Def);
        for &s in sources {
            self.add_edge(tok, s);
        }
        if accumulate {
            for d in self.reaching(name) {
                self.add_edge(tok, d);
            }
        }
        self.state.insert(name.to_string(), BTreeSet::from([tok]));
    }

    /// Returns the value sources (occurrence token indices) of `e`.
    fn expr(&mut self, e: &AstNode) -> Vec<usize> {
        match e.kind {
            NodeKind::Identifier => {
                let name = e.name().unwrap_or_default().to_string();
                vec![self.use_var(e.span.start, &name)]
            }
            NodeKind::Assign => {
                let op = e.op().unwrap_or("=");
                let target = self.store_target(&e.children[0]);
                let sources = self.expr(&e.children[1]);
                match target {
                    Some((tok, name)) => {
                        self.define(tok, &name, &sources, op != "=");
                        vec![tok]
                    }
                    None => sources,
                }
            }
            NodeKind::UnaryOp | NodeKind::PostfixOp
                if matches!(e.op(), Some("++") | Some("--")) =>
            {
                match self.store_target(&e.children[0]) {
                    Some((tok, name)) => {
                        self.define(tok, &name, &[], true);
                        vec![tok]
                    }
                    None => Vec::new(),
                }
            }
            NodeKind::Call => e.children.iter().flat_map(|a| self.expr(a)).collect(),
            _ => e.children.iter().flat_map(|c| self.expr(c)).collect(),
        }
    }

    /// Resolves the variable written by an lvalue, registering subscript
    /// expressions as uses. Returns `None` when no variable is written.
    fn store_target(&mut self, lv: &AstNode) -> Option<(usize, String)> {
        match lv.kind {
            NodeKind::Identifier => Some((lv.span.start, lv.name()?.to_string())),
            NodeKind::ArrayIndex => {
                let target = self.store_target(&lv.children[0]);
                self.expr(&lv.children[1]);
                target
            }
            NodeKind::UnaryOp if lv.op() == Some("*") => self.store_target(&lv.children[0]),
            _ => {
                self.expr(lv);
                None
            }
        }
    }

    fn declaration(&mut self, decl: &AstNode) {
        for d in &decl.children {
            for dim in d.declarator_dims() {
                self.expr(dim);
            }
            let sources = d.declarator_init().map(|i| self.expr(i)).unwrap_or_default();
            if let (Some(tok), Some(name)) = (d.declarator_name_token(), d.name()) {
                let name = name.to_string();
                self.define(tok, &name, &sources, false);
            }
        }
    }

    fn run_loop(&mut self, body: impl Fn(&mut Self)) {
        let entry0 = self.state.clone();
        let mut entry = entry0.clone();
        loop {
            self.state = entry.clone();
            body(self);
            let mut next = entry0.clone();
            merge(&mut next, &self.state);
            if next == entry {
                break;
            }
            entry = next;
        }
        self.state = entry;
    }

    fn stmt(&mut self, s: &AstNode) {
        match s.kind {
            NodeKind::TranslationUnit => {
                for item in &s.children {
                    match item.kind {
                        NodeKind::FunctionDef => {
                            let globals = self.state.clone();
                            self.stmt(item);
                            self.state = globals;
                        }
                        _ => self.stmt(item),
                    }
                }
            }
            NodeKind::FunctionDef => {
                for c in &s.children {
                    self.stmt(c);
                }
            }
            NodeKind::Declaration => self.declaration(s),
            NodeKind::CompoundStmt => {
                for c in &s.children {
                    self.stmt(c);
                }
            }
            NodeKind::ExprStmt | NodeKind::ReturnStmt => {
                for c in &s.children {
                    self.expr(c);
                }
            }
            NodeKind::IfStmt => {
                self.expr(&s.children[0]);
                let before = self.state.clone();
                self.stmt(&s.children[1]);
                let after_then = std::mem::replace(&mut self.state, before);
                if let Some(e) = s.children.get(2) {
                    self.stmt(e);
                }
                merge(&mut self.state, &after_then);
            }
            NodeKind::WhileStmt => {
                self.run_loop(|b| {
                    b.expr(&s.children[0]);
                    b.stmt(&s.children[1]);
                });
                self.expr(&s.children[0]);
            }
            NodeKind::ForStmt => {
                let init = &s.children[0];
                if init.kind == NodeKind::Declaration {
                    self.declaration(init);
                } else {
                    self.expr(init);
                }
                self.run_loop(|b| {
                    b.expr(&s.children[1]);
                    b.stmt(&s.children[3]);
                    b.expr(&s.children[2]);
                });
                self.expr(&s.children[1]);
            }
            NodeKind::PragmaDirective | NodeKind::Empty => {}
            _ => {
                self.expr(s);
            }
        }
    }

    fn finish(self) -> DataFlowGraph {
        let ids: BTreeMap<usize, usize> = self
            .nodes
            .keys()
            .enumerate()
            .map(|(id, tok)| (*tok, id))
            .collect();
        let nodes = self
            .nodes
            .into_iter()
            .enumerate()
            .map(|(node_id, (tok, (var_name, kind)))| DfgNode {
                node_id,
                var_name,
                code_token_index: tok,
                occurrence_kind: kind,
            })
            .collect();
        let edges: BTreeSet<(usize, usize)> = self
            .edges
            .into_iter()
            .map(|(to, from)| (ids[&to], ids[&from]))
            .collect();
        DataFlowGraph {
            nodes,
            edges: edges.into_iter().collect(),
        }
    }
}

/// Builds the data-flow graph of any parsed node (translation unit, statement
/// list or single statement). `tokens` is the stream the node was parsed
/// from; node token indices refer into it.
pub fn build_dfg(unit: &AstNode, tokens: &[Token]) -> DataFlowGraph {
    let mut b = Builder::default();
    b.stmt(unit);
    let g = b.finish();
    debug_assert!(g
        .nodes
        .iter()
        .all(|n| tokens.get(n.code_token_index).is_some_and(|t| t.lexeme == n.var_name)));
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_statements;

    fn dfg(src: &str) -> DataFlowGraph {
        let (block, tokens) = parse_statements(src).unwrap();
        build_dfg(&block, &tokens)
    }

    fn names(g: &DataFlowGraph) -> Vec<&str> {
        g.nodes.iter().map(|n| n.var_name.as_str()).collect()
    }

    #[test]
    fn straight_line_example() {
        let g = dfg("a = b + c; d = a;");
        assert_eq!(names(&g), ["a", "b", "c", "d", "a"]);
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (3, 4), (4, 0)]);
    }

    #[test]
    fn constant_rhs_has_no_edges() {
        let g = dfg("x = 1;");
        assert_eq!(names(&g), ["x"]);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn loop_back_edges() {
        // tokens: s(0) = 0 ; for ( i(6) = 0 ; i(10) < n(12) ; i(14) ++ ) s(17) = s(19) + a(21) [ i(23) ] ;
        let g = dfg("s = 0; for (i = 0; i < n; i++) s = s + a[i];");
        let by_tok = |t: usize| g.nodes.iter().find(|n| n.code_token_index == t).unwrap().node_id;
        let from = |t: usize| -> BTreeSet<usize> {
            g.edges
                .iter()
                .filter(|(to, _)| *to == by_tok(t))
                .map(|(_, f)| g.nodes[*f].code_token_index)
                .collect()
        };
        // use of s in the body: def before the loop and the body def (back-edge)
        assert_eq!(from(19), BTreeSet::from([0, 17]));
        // i in a[i]: init and increment
        assert_eq!(from(23), BTreeSet::from([6, 14]));
        assert_eq!(from(10), BTreeSet::from([6, 14]));
        // i++ draws from the init only; the self-edge is dropped
        assert_eq!(from(14), BTreeSet::from([6]));
        assert_eq!(from(17), BTreeSet::from([19, 21, 23]));
    }

    #[test]
    fn if_else_union() {
        let g = dfg("if (c) x = 1; else x = 2; y = x;");
        let last = g.nodes.len() - 1;
        let srcs: Vec<usize> = g.edges.iter().filter(|e| e.0 == last).map(|e| e.1).collect();
        let src_toks: Vec<usize> = srcs.iter().map(|&i| g.nodes[i].code_token_index).collect();
        assert_eq!(src_toks, [4, 9]);
    }

    #[test]
    fn compound_assignment_and_declarations() {
        let g = dfg("int s; s += v;");
        assert_eq!(names(&g), ["s", "s", "v"]);
        assert_eq!(g.nodes[0].occurrence_kind, OccurrenceKind::Def);
        assert_eq!(g.edges, vec![(1, 0), (1, 2)]);
    }

    #[test]
    fn call_names_are_not_variables() {
        let g = dfg("y = sqrt(x);");
        assert_eq!(names(&g), ["y", "x"]);
        assert_eq!(g.edges, vec![(0, 1)]);
    }

    #[test]
    fn empty_graph_serializes_empty() {
        let (n, a, e) = serialize_dfg(&DataFlowGraph::default());
        assert!(n.is_empty() && a.is_empty() && e.is_empty());
    }

    #[test]
    fn serialize_example() {
        let g = dfg("a=b+c;");
        let (n, a, e) = serialize_dfg(&g);
        assert_eq!(n, ["a", "b", "c"]);
        assert_eq!(a, [0, 2, 4]);
        assert_eq!(e, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn wire_format() {
        let s = dfg("a=b;").serialize();
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"nodes":[["a",0],["b",2]],"edges":[[0,1]]}"#
        );
    }
}
