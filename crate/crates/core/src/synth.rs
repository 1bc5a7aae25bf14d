//! Generated loop corpus with known labels.
//!
//! Every loop is `for (i = 0; i < n; i++) { ... }` with a few element-wise
//! filler statements and up to three injected patterns:
//!
//! * a loop-carried recurrence `a[i] = a[i - 1] op ...` makes the loop
//!   unparallelizable (pragma 0);
//! * a scalar temporary written and then read in the body needs `private`;
//! * a scalar accumulation (`s += ...` or `s = s + ...`) needs `reduction`.
//!
//! The clause patterns have look-alikes that do not trigger them (a
//! read-only scalar coefficient, an array `+=`), so those labels depend on
//! structure, not on single tokens; a shifted read from another array can
//! optionally imitate the recurrence. Names are drawn from per-role pools,
//! which gives an unaugmented model a shortcut that renaming removes.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{split_corpus, Labels, Sample};
use crate::syntax::{parse_statements, render_statements};

const ARRAYS: [&str; 9] = ["a", "b", "c", "x", "y", "z", "u", "v", "w"];
const INDEX: [&str; 3] = ["i", "j", "k"];
const BOUND: [&str; 3] = ["n", "m", "len"];
const TEMPS: [&str; 4] = ["t", "tmp", "temp", "r"];
const ACCS: [&str; 4] = ["s", "sum", "acc", "total"];
const COEFS: [&str; 4] = ["alpha", "beta", "scale", "coef"];
const OPS: [&str; 3] = ["+", "-", "*"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub n: usize,
    pub seed: u64,
    pub p_recurrence: f64,
    pub p_temp: f64,
    pub p_accumulate: f64,
    /// Chance of adding the clause patterns' look-alikes when the pattern is
    /// absent.
    pub p_lookalike: f64,
    /// Chance of a shifted read from a different array (`a[i] = b[i - 1]`)
    /// in a loop without recurrence. Telling it apart needs a name
    /// comparison, which the default model does not learn in 10 epochs.
    pub p_shifted_read: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            n: 2000,
            seed: 0,
            p_recurrence: 0.4,
            p_temp: 0.5,
            p_accumulate: 0.5,
            p_lookalike: 0.5,
            p_shifted_read: 0.0,
        }
    }
}

struct Names<'a> {
    idx: &'a str,
    bound: &'a str,
    arrays: Vec<&'a str>,
    temp: &'a str,
    acc: &'a str,
    coef: &'a str,
}

fn operand(rng: &mut ChaCha8Rng, names: &Names<'_>, read: &[&str]) -> String {
    let i = names.idx;
    match rng.gen_range(0..3) {
        0 => format!("{}", rng.gen_range(1..10)),
        1 => format!("{}[{i}]", read.choose(rng).unwrap()),
        _ => format!("{} * {}[{i}]", names.coef, read.choose(rng).unwrap()),
    }
}

/// One loop's code and labels.
pub fn synth_loop(rng: &mut ChaCha8Rng, opts: &SynthOptions) -> (String, Labels, Option<String>) {
    let mut arrays = ARRAYS.to_vec();
    arrays.shuffle(rng);
    let names = Names {
        idx: INDEX.choose(rng).unwrap(),
        bound: BOUND.choose(rng).unwrap(),
        arrays,
        temp: TEMPS.choose(rng).unwrap(),
        acc: ACCS.choose(rng).unwrap(),
        coef: COEFS.choose(rng).unwrap(),
    };
    // first three arrays are written, the rest only read
    let written = &names.arrays[..3];
    let read = &names.arrays[3..];
    let i = names.idx;
    let op = |rng: &mut ChaCha8Rng| *OPS.choose(rng).unwrap();

    let recurrence = rng.gen_bool(opts.p_recurrence);
    let temp = rng.gen_bool(opts.p_temp);
    let accumulate = rng.gen_bool(opts.p_accumulate);

    // groups of statements that must stay in order internally
    let mut groups: Vec<Vec<String>> = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let dst = written[rng.gen_range(1..3)];
        let o = op(rng);
        let rhs = operand(rng, &names, read);
        groups.push(vec![format!("{dst}[{i}] = {}[{i}] {o} {rhs};", read.choose(rng).unwrap())]);
    }
    let dst = written[0];
    let o = op(rng);
    let rhs = operand(rng, &names, read);
    if recurrence {
        groups.push(vec![format!("{dst}[{i}] = {dst}[{i} - 1] {o} {rhs};")]);
    } else if rng.gen_bool(opts.p_shifted_read) {
        let src = read.choose(rng).unwrap();
        groups.push(vec![format!("{dst}[{i}] = {src}[{i} - 1] {o} {rhs};")]);
    }
    let t = names.temp;
    if temp {
        let o2 = op(rng);
        let (w, r1, r2) = (written[1], read.choose(rng).unwrap(), read.choose(rng).unwrap());
        groups.push(vec![
            format!("{t} = {r1}[{i}] {} {};", op(rng), rng.gen_range(1..10)),
            format!("{w}[{i}] = {t} {o2} {r2}[{i}];"),
        ]);
    } else if rng.gen_bool(opts.p_lookalike) {
        let (w, r1) = (written[1], read.choose(rng).unwrap());
        groups.push(vec![format!("{w}[{i}] = {} * {r1}[{i}];", names.coef)]);
    }
    let s = names.acc;
    if accumulate {
        let r1 = read.choose(rng).unwrap();
        groups.push(vec![if rng.gen_bool(0.5) {
            format!("{s} += {r1}[{i}];")
        } else {
            format!("{s} = {s} + {r1}[{i}] * {}[{i}];", read.choose(rng).unwrap())
        }]);
    } else if rng.gen_bool(opts.p_lookalike) {
        let (w, r1) = (written[2], read.choose(rng).unwrap());
        groups.push(vec![format!("{w}[{i}] += {r1}[{i}];")]);
    }
    groups.shuffle(rng);
    let body: Vec<String> = groups.into_iter().flatten().collect();
    let code = format!(
        "for ({i} = 0; {i} < {b}; {i}++) {{\n{}\n}}",
        body.join("\n"),
        b = names.bound
    );
    let pragma = !recurrence;
    let labels = Labels::new(pragma, pragma && temp, pragma && accumulate);
    let raw = pragma.then(|| {
        let mut p = "#pragma omp parallel for".to_string();
        if labels.private {
            p.push_str(&format!(" private({t})"));
        }
        if labels.reduction {
            p.push_str(&format!(" reduction(+:{s})"));
        }
        p
    });
    (code, labels, raw)
}

/// `opts.n` distinct loops, split 80/10/10.
pub fn synth_corpus(opts: &SynthOptions) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(opts.n);
    while out.len() < opts.n {
        let (code, labels, raw) = synth_loop(&mut rng, opts);
        let (block, _) = parse_statements(&code).expect("generated code parses");
        let code = render_statements(&block.children);
        let path = format!("synth/loop{:05}.c", out.len());
        let mut s = Sample::new(path, code, String::new(), raw, labels).expect("generated code parses");
        if seen.insert(s.id.clone()) {
            s.offset = out.len();
            out.push(s);
        }
    }
    split_corpus(out, opts.seed, &HashSet::new())
}
