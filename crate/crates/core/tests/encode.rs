use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use ompadvisor::corpus::{Labels, Sample};
use ompadvisor::encode::{build_attention_mask, encode_sample, EncodeOptions, Vocabulary, MASKED};
use ompadvisor::model::masked_softmax;

fn loop_sample(body: &[String]) -> Sample {
    let code = format!("for (i = 0; i < n; i++) {{\n{}\n}}", body.join("\n"));
    Sample::new("p.c", code, String::new(), None, Labels::default()).unwrap()
}

fn body_strategy() -> impl Strategy<Value = Vec<String>> {
    let var = prop::sample::select(vec!["a", "b", "c", "s", "t"]);
    let stmt = (var.clone(), var.clone(), var, 0..4u8).prop_map(|(x, y, z, k)| match k {
        0 => format!("{x} = {y} + {z};"),
        1 => format!("{x}[i] = {y}[i] * {z};"),
        2 => format!("{x} += {y};"),
        _ => format!("{x} = {y}[i - 1];"),
    });
    prop::collection::vec(stmt, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mask_properties(body in body_strategy(), max_code in 4usize..64, max_dfg in 0usize..20) {
        let s = loop_sample(&body);
        let vocab = Vocabulary::build([&s], 1).unwrap();
        let opts = EncodeOptions { max_code, max_dfg };
        let (e, stats) = encode_sample(&s, &vocab, &opts).unwrap();
        prop_assert!(e.len() <= opts.max_len());
        prop_assert_eq!(e.ids.len(), e.len());
        prop_assert_eq!(e.positions.len(), e.len());
        prop_assert!(e.mask.is_symmetric());
        let code_end = e.n_code + 2;
        for i in 0..e.len() {
            prop_assert!(e.mask.allowed(i, i));
            for j in 0..e.len() {
                let both_code = i < code_end && j < code_end;
                if both_code {
                    prop_assert!(e.mask.allowed(i, j));
                }
            }
        }
        let edges: BTreeSet<(usize, usize)> = e.edges.iter().copied().collect();
        for a in 0..e.n_dfg() {
            prop_assert!(e.dfg_alignment[a] < e.n_code);
            for b in 0..e.n_dfg() {
                let want = a == b || edges.contains(&(a, b)) || edges.contains(&(b, a));
                prop_assert_eq!(e.mask.allowed(code_end + a, code_end + b), want);
            }
        }
        // positions: code tokens 1.., everything else 0
        for (k, &p) in e.positions.iter().enumerate() {
            let want = if (1..=e.n_code).contains(&k) { k as u32 } else { 0 };
            prop_assert_eq!(p, want);
        }
        prop_assert_eq!(stats.samples, 1);
    }

    #[test]
    fn softmax_rows_are_distributions(
        n in 1usize..12,
        scores in prop::collection::vec(-30.0f64..30.0, 144),
        bits in prop::collection::vec(any::<bool>(), 144),
    ) {
        let s = Array2::from_shape_fn((n, n), |(i, j)| scores[i * 12 + j]);
        let m = Array2::from_shape_fn((n, n), |(i, j)| if i == j || bits[i * 12 + j] { 0.0 } else { MASKED });
        let a = masked_softmax(&s, &m);
        for i in 0..n {
            let sum: f64 = a.row(i).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for j in 0..n {
                if m[[i, j]] != 0.0 {
                    prop_assert_eq!(a[[i, j]], 0.0);
                } else {
                    prop_assert!(a[[i, j]] >= 0.0);
                }
            }
        }
    }
}

#[test]
fn mask_rejects_bad_alignment_and_edges() {
    assert!(build_attention_mask(3, &[3], &[]).is_err());
    assert!(build_attention_mask(3, &[0, 1], &[(0, 2)]).is_err());
    let m = build_attention_mask(3, &[0, 2], &[(1, 0)]).unwrap();
    assert_eq!(m.len(), 7);
    assert!(m.allowed(5, 6) && m.allowed(6, 5));
    assert!(m.allowed(5, 1) && m.allowed(6, 3));
    assert!(!m.allowed(5, 2));
}
