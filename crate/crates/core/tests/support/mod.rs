//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// The variable written by the statement.
    Target,
    /// A subscript of the store target; a plain use.
    Subscript,
    /// An occurrence on the right-hand side; a use that feeds the target.
    Rhs,
}

#[derive(Debug, Clone)]
pub struct Occ {
    pub tok: usize,
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub occs: Vec<Occ>,
    /// Whether the target's previous value flows into the new one
    /// (`+=`, `++`).
    pub accumulates: bool,
}

/// A straight-line statement list with every variable occurrence recorded
/// by token index, built token by token.
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub tokens: Vec<String>,
    pub stmts: Vec<Stmt>,
}

impl Program {
    pub fn source(&self) -> String {
        self.tokens.join(" ")
    }

    fn push(&mut self, t: &str) -> usize {
        self.tokens.push(t.to_string());
        self.tokens.len() - 1
    }

    fn var(&mut self, occs: &mut Vec<Occ>, name: &str, role: Role) {
        let tok = self.push(name);
        occs.push(Occ {
            tok,
            name: name.to_string(),
            role,
        });
    }

    fn expr(&mut self, rng: &mut ChaCha8Rng, vars: &[&str], depth: u32, occs: &mut Vec<Occ>) {
        let pick = if depth == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..5) };
        match pick {
            0 => {
                let v = *vars.choose(rng).unwrap();
                self.var(occs, v, Role::Rhs);
            }
            1 => {
                let n = rng.gen_range(0..100).to_string();
                self.push(&n);
            }
            2 => {
                let (a, i) = (*vars.choose(rng).unwrap(), *vars.choose(rng).unwrap());
                self.var(occs, a, Role::Rhs);
                self.push("[");
                self.var(occs, i, Role::Rhs);
                self.push("]");
            }
            3 => {
                self.push("(");
                self.expr(rng, vars, depth - 1, occs);
                self.push(")");
            }
            _ => {
                self.expr(rng, vars, depth - 1, occs);
                let op = *["+", "-", "*", "/"].choose(rng).unwrap();
                self.push(op);
                self.expr(rng, vars, depth - 1, occs);
            }
        }
    }
}

/// A random program of 1–`max_stmts` statements over 1–`max_vars`
/// variables: plain, compound and array assignments, increments and
/// declarations with initializers.
pub fn random_program(rng: &mut ChaCha8Rng, max_stmts: usize, max_vars: usize) -> Program {
    let pool = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let n_vars = rng.gen_range(1..=max_vars.min(pool.len()));
    let vars: Vec<&str> = pool[..n_vars].to_vec();
    let mut declared = BTreeSet::new();
    let mut p = Program::default();
    for _ in 0..rng.gen_range(1..=max_stmts) {
        let mut occs = Vec::new();
        let target = *vars.choose(rng).unwrap();
        let mut accumulates = false;
        match rng.gen_range(0..6) {
            0 => {
                p.push("++");
                p.var(&mut occs, target, Role::Target);
                p.push(";");
                accumulates = true;
            }
            1 if !declared.contains(target) => {
                declared.insert(target);
                p.push("int");
                p.var(&mut occs, target, Role::Target);
                p.push("=");
                p.expr(rng, &vars, 2, &mut occs);
                p.push(";");
            }
            2 => {
                p.var(&mut occs, target, Role::Target);
                p.push("[");
                let i = *vars.choose(rng).unwrap();
                p.var(&mut occs, i, Role::Subscript);
                p.push("]");
                let op = *["=", "+="].choose(rng).unwrap();
                accumulates = op != "=";
                p.push(op);
                p.expr(rng, &vars, 2, &mut occs);
                p.push(";");
            }
            k => {
                p.var(&mut occs, target, Role::Target);
                let op = if k == 3 { *["+=", "-=", "*="].choose(rng).unwrap() } else { "=" };
                accumulates = op != "=";
                p.push(op);
                p.expr(rng, &vars, 2, &mut occs);
                p.push(";");
            }
        }
        p.stmts.push(Stmt { occs, accumulates });
    }
    p
}

/// Reaching-definitions edges `(to token, from token)` by exhaustive search:
/// a definition in statement `d` reaches statement `s > d` iff no statement
/// strictly between them (nor `s` itself, before its own reads) redefines
/// the variable.
pub fn oracle_edges(p: &Program) -> BTreeSet<(usize, usize)> {
    let target_of = |s: &Stmt| s.occs.iter().find(|o| o.role == Role::Target).cloned();
    let reaching = |name: &str, at: usize| -> Vec<usize> {
        let mut out = Vec::new();
        for d in 0..at {
            let Some(def) = target_of(&p.stmts[d]) else { continue };
            if def.name != name {
                continue;
            }
            let killed = (d + 1..at).any(|m| target_of(&p.stmts[m]).is_some_and(|t| t.name == name));
            if !killed {
                out.push(def.tok);
            }
        }
        out
    };
    let mut edges = BTreeSet::new();
    for (si, s) in p.stmts.iter().enumerate() {
        let target = target_of(s).expect("every statement writes a variable");
        for o in &s.occs {
            match o.role {
                Role::Target => {
                    if s.accumulates {
                        for d in reaching(&o.name, si) {
                            edges.insert((o.tok, d));
                        }
                    }
                }
                Role::Subscript => {
                    for d in reaching(&o.name, si) {
                        edges.insert((o.tok, d));
                    }
                }
                Role::Rhs => {
                    for d in reaching(&o.name, si) {
                        edges.insert((o.tok, d));
                    }
                    edges.insert((target.tok, o.tok));
                }
            }
        }
    }
    edges
}

/// Token indices of every variable occurrence.
pub fn oracle_nodes(p: &Program) -> Vec<(usize, String)> {
    let mut v: Vec<(usize, String)> = p
        .stmts
        .iter()
        .flat_map(|s| s.occs.iter().map(|o| (o.tok, o.name.clone())))
        .collect();
    v.sort();
    v
}
