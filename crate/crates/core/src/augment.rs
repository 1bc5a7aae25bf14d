//! Variable-renaming augmentation and the epoch-indexed curriculum schedule.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{variables_in, Sample};
use crate::syntax::{parse_statements, render_statements, AstNode, Attrs, NodeKind, SyntaxError};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("epochs are 1-based, got {0}")]
    EpochOutOfRange(u32),
    #[error("rename fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("sample {id} does not parse: {source}")]
    Parse {
        id: String,
        #[source]
        source: SyntaxError,
    },
}

/// Rename fraction per epoch: none in the first epoch, then 10% more each
/// epoch, held at 40% from epoch 5 on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumSchedule;

const RAMP: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];

impl CurriculumSchedule {
    pub fn ratio(&self, epoch: u32) -> Result<f64, AugmentError> {
        curriculum_ratio(epoch)
    }
}

pub fn curriculum_ratio(epoch: u32) -> Result<f64, AugmentError> {
    if epoch == 0 {
        return Err(AugmentError::EpochOutOfRange(epoch));
    }
    Ok(RAMP[(epoch as usize - 1).min(RAMP.len() - 1)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugMode {
    /// Original data every epoch.
    None,
    /// Curriculum ramp of rename fractions.
    Curriculum,
    /// Every variable renamed every epoch.
    Replaced,
}

impl AugMode {
    pub fn fraction(self, epoch: u32) -> Result<f64, AugmentError> {
        match self {
            AugMode::None => {
                curriculum_ratio(epoch)?;
                Ok(0.0)
            }
            AugMode::Curriculum => curriculum_ratio(epoch),
            AugMode::Replaced => {
                curriculum_ratio(epoch)?;
                Ok(1.0)
            }
        }
    }
}

/// Number of variables renamed out of `n` at `fraction`.
pub fn rename_count(fraction: f64, n: usize) -> usize {
    // The epsilon keeps 0.3 * 10 at 3 despite binary rounding.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Distinct variable names in a sample's loop and context code.
pub fn sample_variables(sample: &Sample) -> Result<BTreeSet<String>, AugmentError> {
    let parse = |code: &str| {
        parse_statements(code).map_err(|source| AugmentError::Parse {
            id: sample.id.clone(),
            source,
        })
    };
    let (loop_block, _) = parse(&sample.loop_code)?;
    let (ctx_block, _) = parse(&sample.context_code)?;
    let mut vars = variables_in(&loop_block);
    vars.extend(variables_in(&ctx_block));
    Ok(vars)
}

fn rename_in_tree(node: &mut AstNode, map: &BTreeMap<String, String>) {
    node.walk_mut(&mut |n| match (&n.kind, &mut n.attrs) {
        (NodeKind::Identifier, Attrs::Name(name))
        | (NodeKind::Declarator, Attrs::Declarator { name, .. }) => {
            if let Some(new) = map.get(name.as_str()) {
                *name = new.clone();
            }
        }
        _ => {}
    });
}

/// Renames whole-word identifiers inside the parenthesized clause arguments
/// of a pragma line.
fn rename_in_pragma(raw: &str, map: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut depth = 0usize;
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String, depth: usize| {
        if !word.is_empty() {
            match map.get(word.as_str()) {
                Some(new) if depth > 0 => out.push_str(new),
                _ => out.push_str(word),
            }
            word.clear();
        }
    };
    for c in raw.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            word.push(c);
            continue;
        }
        flush(&mut word, &mut out, depth);
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ => {}
        }
        out.push(c);
    }
    flush(&mut word, &mut out, depth);
    out
}

/// Chooses the variables to rename and their fresh `var<k>` names.
pub fn rename_plan(
    vars: &BTreeSet<String>,
    fraction: f64,
    seed: u64,
) -> Result<BTreeMap<String, String>, AugmentError> {
    if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
        return Err(AugmentError::BadFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names: Vec<&String> = vars.iter().collect();
    names.shuffle(&mut rng);
    let k = rename_count(fraction, names.len());
    let mut taken: BTreeSet<String> = vars.clone();
    let mut plan = BTreeMap::new();
    for name in names.into_iter().take(k) {
        let fresh = loop {
            let candidate = format!("var{}", rng.gen_range(0..=9999u32));
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        taken.insert(fresh.clone());
        plan.insert(name.clone(), fresh);
    }
    Ok(plan)
}

/// Returns a copy of `sample` with `⌊fraction·|V|⌋` of its distinct variables
/// renamed consistently across loop code, context code and pragma clause
/// arguments. Labels and id are unchanged; the DFG is rebuilt.
pub fn rename_variables(sample: &Sample, fraction: f64, seed: u64) -> Result<Sample, AugmentError> {
    let vars = sample_variables(sample)?;
    let plan = rename_plan(&vars, fraction, seed)?;
    if plan.is_empty() {
        return Ok(sample.clone());
    }
    let parse_err = |source| AugmentError::Parse {
        id: sample.id.clone(),
        source,
    };
    let rewrite = |code: &str| -> Result<String, AugmentError> {
        let (mut block, _) = parse_statements(code).map_err(parse_err)?;
        rename_in_tree(&mut block, &plan);
        Ok(render_statements(&block.children))
    };
    let mut out = sample.clone();
    out.loop_code = rewrite(&sample.loop_code)?;
    out.context_code = rewrite(&sample.context_code)?;
    out.pragma_raw = sample.pragma_raw.as_deref().map(|p| rename_in_pragma(p, &plan));
    out.rebuild_dfg().map_err(parse_err)?;
    Ok(out)
}

/// Per-sample seed for epoch-wise re-randomization.
pub fn epoch_seed(base_seed: u64, epoch: u32, index: usize) -> u64 {
    let mut x = base_seed
        .wrapping_add(epoch as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    // splitmix64 finalizer
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Applies the rename fraction of `mode` at `epoch` to every sample.
pub fn augment_corpus(
    samples: &[Sample],
    mode: AugMode,
    epoch: u32,
    base_seed: u64,
) -> Result<Vec<Sample>, AugmentError> {
    let fraction = mode.fraction(epoch)?;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| rename_variables(s, fraction, epoch_seed(base_seed, epoch, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_samples, Labels};

    fn reduction_sample() -> Sample {
        let src = "void f(int n, double *a, double s) {\nint i;\n#pragma omp parallel for private(i) reduction(+:s)\nfor(i=0;i<n;i++) s+=a[i];\n}";
        extract_samples("f.c", src, false).samples.remove(0)
    }

    #[test]
    fn schedule_values() {
        let expect = [0.0, 0.1, 0.2, 0.3, 0.4, 0.4, 0.4, 0.4, 0.4];
        for (e, want) in (1..=9).zip(expect) {
            assert_eq!(curriculum_ratio(e).unwrap(), want);
        }
        assert!(curriculum_ratio(0).is_err());
    }

    #[test]
    fn zero_fraction_is_identity() {
        let s = reduction_sample();
        assert_eq!(rename_variables(&s, 0.0, 3).unwrap(), s);
    }

    #[test]
    fn full_rename() {
        let s = reduction_sample();
        let r = rename_variables(&s, 1.0, 1).unwrap();
        let vars = sample_variables(&r).unwrap();
        assert_eq!(vars.len(), 4);
        assert!(vars.iter().all(|v| v.starts_with("var")));
        assert_eq!(r.labels(), Labels::new(true, true, true));
        assert_eq!(r.id, s.id);
        assert_eq!(r.dfg.edges, s.dfg.edges);
        // clause arguments follow the rename
        let raw = r.pragma_raw.unwrap();
        assert!(!raw.contains("(i)") && !raw.contains(":s)"), "{raw}");
        assert!(raw.starts_with("#pragma omp parallel for private(var"));
    }

    #[test]
    fn pragma_rewrite_only_inside_parens() {
        let map = BTreeMap::from([("for".to_string(), "x".to_string()), ("i".to_string(), "var1".to_string())]);
        assert_eq!(
            rename_in_pragma("#pragma omp parallel for private(i, ii)", &map),
            "#pragma omp parallel for private(var1, ii)"
        );
    }

    #[test]
    fn fresh_names_avoid_existing_ones() {
        let vars: BTreeSet<String> = (0..=9998).map(|k| format!("var{k}")).collect();
        let mut with_x = vars.clone();
        with_x.insert("x".into());
        let plan = rename_plan(&with_x, 1.0 / with_x.len() as f64 + 1e-12, 5).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan.values().next().unwrap(), "var9999");
    }

    #[test]
    fn rename_count_edges() {
        assert_eq!(rename_count(0.3, 10), 3);
        assert_eq!(rename_count(0.1, 9), 0);
        assert_eq!(rename_count(0.4, 5), 2);
        assert_eq!(rename_count(1.0, 7), 7);
    }
}
