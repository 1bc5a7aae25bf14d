use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample::{Sample, Split};

/// Keeps the first sample for each normalized-code hash. Input order is
/// taken as (path, offset) order after a stable sort.
pub fn deduplicate(samples: Vec<Sample>) -> Vec<Sample> {
    let mut samples = samples;
    samples.sort_by(|a, b| (&a.path, a.offset).cmp(&(&b.path, b.offset)));
    let mut seen = HashSet::new();
    samples.retain(|s| seen.insert(s.id.clone()));
    samples
}

/// Train/valid/test sizes for `n` samples, rounding 80/10/10 to nearest.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (8 * n + 5) / 10;
    let valid = ((n + 5) / 10).min(n - train);
    (train, valid, n - train - valid)
}

/// Assigns splits by position in a seeded shuffle. Samples whose id is in
/// `holdout` never land in train; they get `Split::None` instead.
pub fn split_corpus(samples: Vec<Sample>, seed: u64, holdout: &HashSet<String>) -> Vec<Sample> {
    let mut samples = samples;
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (train, valid, _) = split_sizes(n);
    for (pos, &idx) in order.iter().enumerate() {
        let s = &mut samples[idx];
        s.split = if pos < train {
            if holdout.contains(&s.id) {
                Split::None
            } else {
                Split::Train
            }
        } else if pos < train + valid {
            Split::Valid
        } else {
            Split::Test
        };
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Labels;

    fn sample(path: &str, code: &str) -> Sample {
        Sample::new(path, code.to_string(), String::new(), None, Labels::default()).unwrap()
    }

    fn loops(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|k| sample("f.c", &format!("for (i = 0; i < {k}; i++) {{\na[i] = 0;\n}}")))
            .collect()
    }

    fn count(s: &[Sample], split: Split) -> usize {
        s.iter().filter(|x| x.split == split).count()
    }

    #[test]
    fn ten_samples() {
        let out = split_corpus(loops(10), 7, &HashSet::new());
        assert_eq!(
            (count(&out, Split::Train), count(&out, Split::Valid), count(&out, Split::Test)),
            (8, 1, 1)
        );
    }

    #[test]
    fn full_scale_sizes() {
        let (tr, va, te) = split_sizes(54_663);
        assert!(tr.abs_diff(43_731) <= 1);
        assert!(va.abs_diff(5_466) <= 1);
        assert!(te.abs_diff(5_466) <= 1);
        assert_eq!(tr + va + te, 54_663);
    }

    #[test]
    fn small_sizes_are_total() {
        for n in 0..50 {
            let (a, b, c) = split_sizes(n);
            assert_eq!(a + b + c, n);
        }
    }

    #[test]
    fn holdout_never_in_train() {
        let all = loops(30);
        let target = all[3].id.clone();
        let holdout = HashSet::from([target.clone()]);
        for seed in 0..40 {
            let out = split_corpus(all.clone(), seed, &holdout);
            let s = out.iter().find(|s| s.id == target).unwrap();
            assert_ne!(s.split, Split::Train);
        }
    }

    #[test]
    fn dedup_examples() {
        let a = sample("a.c", "for (i = 0; i < n; i++) {\na[i] = b[i];\n}");
        let b = sample("b.c", "for (i = 0; i < n; i++) {\na[i] = b[i];\n}");
        let renamed = sample("c.c", "for (i = 0; i < n; i++) {\nx[i] = y[i];\n}");
        let c10 = sample("d.c", "for (i = 0; i < 10; i++) {\na[i] = 0;\n}");
        let c20 = sample("d.c", "for (i = 0; i < 20; i++) {\na[i] = 0;\n}");
        assert_eq!(deduplicate(vec![b.clone(), a.clone()]), vec![a.clone()]);
        assert_eq!(deduplicate(vec![a.clone(), renamed]).len(), 1);
        assert_eq!(deduplicate(vec![c10, c20]).len(), 2);
    }
}
