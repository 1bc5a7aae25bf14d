//! OpenMP directive parsing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parser::fold_pragma;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PragmaError {
    #[error("not an OpenMP pragma: {0:?}")]
    NotOmp(String),
    #[error("unbalanced parentheses in {0:?}")]
    Unbalanced(String),
    #[error("reduction clause without operator in {0:?}")]
    EmptyReductionOp(String),
    #[error("unknown reduction operator {op:?} in {raw:?}")]
    BadReductionOp { op: String, raw: String },
    #[error("reduction clause without variables in {0:?}")]
    EmptyReductionList(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    ParallelFor,
    For,
    Parallel,
    Barrier,
    Critical,
    Atomic,
    Other,
}

impl Directive {
    /// Directives that mark a loop as parallelized.
    pub fn is_worksharing_loop(self) -> bool {
        matches!(self, Directive::ParallelFor | Directive::For)
    }

    pub fn is_synchronization(self) -> bool {
        matches!(self, Directive::Barrier | Directive::Critical | Directive::Atomic)
    }
}

pub const REDUCTION_OPS: &[&str] = &["+", "*", "-", "&", "|", "^", "&&", "||", "min", "max"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction_op: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseKind {
    Private,
    FirstPrivate,
    LastPrivate,
    Shared,
    Reduction,
    Schedule,
    Collapse,
    NumThreads,
    NoWait,
    Default,
    If,
    Other,
}

impl Clause {
    pub fn kind(&self) -> ClauseKind {
        match self.name.as_str() {
            "private" => ClauseKind::Private,
            "firstprivate" => ClauseKind::FirstPrivate,
            "lastprivate" => ClauseKind::LastPrivate,
            "shared" => ClauseKind::Shared,
            "reduction" => ClauseKind::Reduction,
            "schedule" => ClauseKind::Schedule,
            "collapse" => ClauseKind::Collapse,
            "num_threads" => ClauseKind::NumThreads,
            "nowait" => ClauseKind::NoWait,
            "default" => ClauseKind::Default,
            "if" => ClauseKind::If,
            _ => ClauseKind::Other,
        }
    }

    /// Whether the clause arguments name variables (as opposed to schedule
    /// kinds, counts or expressions).
    pub fn takes_variable_list(&self) -> bool {
        matches!(
            self.kind(),
            ClauseKind::Private
                | ClauseKind::FirstPrivate
                | ClauseKind::LastPrivate
                | ClauseKind::Shared
                | ClauseKind::Reduction
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmpPragma {
    pub directive: Directive,
    pub clauses: Vec<Clause>,
    pub raw: String,
}

impl OmpPragma {
    pub fn has_clause(&self, kind: ClauseKind) -> bool {
        self.clauses.iter().any(|c| c.kind() == kind)
    }
}

// Words that can form the directive name itself rather than a clause.
const DIRECTIVE_WORDS: &[&str] = &[
    "parallel",
    "for",
    "simd",
    "sections",
    "section",
    "single",
    "master",
    "masked",
    "critical",
    "barrier",
    "atomic",
    "task",
    "taskloop",
    "taskwait",
    "taskyield",
    "taskgroup",
    "target",
    "teams",
    "distribute",
    "declare",
    "threadprivate",
    "flush",
    "ordered",
    "loop",
    "data",
    "enter",
    "exit",
    "update",
    "workshare",
];

struct Item {
    word: String,
    args: Option<String>,
}

fn split_items(body: &str, raw: &str) -> Result<Vec<Item>, PragmaError> {
    let chars: Vec<char> = body.chars().collect();
    let mut items: Vec<Item> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == ',' {
            i += 1;
            continue;
        }
        if c == '(' {
            // Parenthesized group attached to the previous word.
            let mut depth = 0usize;
            let start = i + 1;
            let mut end = None;
            while i < chars.len() {
                match chars[i] {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(i);
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            let end = end.ok_or_else(|| PragmaError::Unbalanced(raw.to_string()))?;
            let group: String = chars[start..end].iter().collect();
            match items.last_mut() {
                Some(last) if last.args.is_none() => last.args = Some(group),
                _ => return Err(PragmaError::Unbalanced(raw.to_string())),
            }
            i = end + 1;
            continue;
        }
        if c == ')' {
            return Err(PragmaError::Unbalanced(raw.to_string()));
        }
        let start = i;
        while i < chars.len()
            && !chars[i].is_whitespace()
            && chars[i] != '('
            && chars[i] != ')'
            && chars[i] != ','
        {
            i += 1;
        }
        items.push(Item {
            word: chars[start..i].iter().collect(),
            args: None,
        });
    }
    Ok(items)
}

/// Splits on commas that are not nested in brackets.
fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

pub fn parse_omp_pragma(raw: &str) -> Result<OmpPragma, PragmaError> {
    let folded = fold_pragma(raw);
    let body = folded
        .strip_prefix('#')
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix("pragma"))
        .filter(|s| s.starts_with(char::is_whitespace))
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix("omp"))
        .filter(|s| s.is_empty() || s.starts_with(char::is_whitespace))
        .ok_or_else(|| PragmaError::NotOmp(raw.to_string()))?;

    let items = split_items(body, raw)?;

    let mut n_directive = 0;
    for item in &items {
        if item.args.is_none() && DIRECTIVE_WORDS.contains(&item.word.as_str()) {
            n_directive += 1;
        } else {
            break;
        }
    }
    // `critical(name)` carries its name in parentheses.
    if n_directive == 0 && items.first().is_some_and(|i| i.word == "critical") {
        n_directive = 1;
    }
    let words: Vec<&str> = items[..n_directive].iter().map(|i| i.word.as_str()).collect();
    let parallel_then_for = words
        .iter()
        .position(|w| *w == "parallel")
        .is_some_and(|p| words[p + 1..].contains(&"for"));
    let directive = if parallel_then_for {
        Directive::ParallelFor
    } else {
        match words.first().copied() {
            Some("for") => Directive::For,
            Some("parallel") => Directive::Parallel,
            Some("barrier") => Directive::Barrier,
            Some("critical") => Directive::Critical,
            Some("atomic") => Directive::Atomic,
            _ => Directive::Other,
        }
    };

    let mut clauses = Vec::new();
    for (idx, item) in items.iter().enumerate() {
        let directive_word = idx < n_directive;
        if directive_word && item.args.is_none() {
            continue;
        }
        let name = if directive_word {
            "name".to_string()
        } else {
            item.word.clone()
        };
        let args_text = item.args.clone().unwrap_or_default();
        let mut clause = Clause {
            name,
            args: split_args(&args_text),
            reduction_op: None,
        };
        if clause.kind() == ClauseKind::Reduction {
            let (op, vars) = args_text
                .split_once(':')
                .ok_or_else(|| PragmaError::EmptyReductionOp(raw.to_string()))?;
            let op = op.trim();
            if op.is_empty() {
                return Err(PragmaError::EmptyReductionOp(raw.to_string()));
            }
            if !REDUCTION_OPS.contains(&op) {
                return Err(PragmaError::BadReductionOp {
                    op: op.to_string(),
                    raw: raw.to_string(),
                });
            }
            clause.reduction_op = Some(op.to_string());
            clause.args = split_args(vars);
            if clause.args.is_empty() || clause.args.iter().any(String::is_empty) {
                return Err(PragmaError::EmptyReductionList(raw.to_string()));
            }
        }
        clauses.push(clause);
    }

    Ok(OmpPragma {
        directive,
        clauses,
        raw: raw.to_string(),
    })
}
