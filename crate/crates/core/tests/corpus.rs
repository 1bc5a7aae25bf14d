mod support;

use std::collections::HashSet;
use std::fs;

use ompadvisor::corpus::{
    build_corpus, extract_samples, read_samples, split_sizes, write_corpus, BuildOptions, CorpusStats,
    RejectReason, Split,
};

fn src() -> std::path::PathBuf {
    support::fixture("corpus/src")
}

#[test]
fn fixture_rejects_and_stats_match_expectations() {
    let build = build_corpus(&src(), &BuildOptions::default()).unwrap();
    let expected: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(support::fixture("corpus/expected_rejects.json")).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&build.rejects).unwrap(), expected);
    let golden: CorpusStats =
        serde_json::from_str(&fs::read_to_string(support::fixture("corpus/expected_stats.json")).unwrap()).unwrap();
    assert_eq!(build.stats, golden);
    assert!(build.stats.is_consistent());
    assert_eq!(build.samples.len() + build.rejects.len(), 35);
    let reasons: Vec<RejectReason> = build.rejects.iter().map(|r| r.reason).collect();
    assert_eq!(reasons.iter().filter(|&&r| r == RejectReason::EmptyLoop).count(), 2);
}

#[test]
fn build_is_independent_of_thread_count() {
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&one, 1), (&two, 2)] {
        let opts = BuildOptions {
            threads,
            seed: 3,
            ..BuildOptions::default()
        };
        write_corpus(&build_corpus(&src(), &opts).unwrap(), dir.path()).unwrap();
    }
    for f in ["corpus.jsonl", "rejects.jsonl", "stats.json"] {
        assert_eq!(fs::read(one.path().join(f)).unwrap(), fs::read(two.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_changes_split_but_not_samples() {
    let a = build_corpus(&src(), &BuildOptions::default()).unwrap();
    let b = build_corpus(
        &src(),
        &BuildOptions {
            seed: 1,
            ..BuildOptions::default()
        },
    )
    .unwrap();
    let ids = |v: &[ompadvisor::corpus::Sample]| v.iter().map(|s| s.id.clone()).collect::<HashSet<_>>();
    assert_eq!(ids(&a.samples), ids(&b.samples));
    let splits = |v: &[ompadvisor::corpus::Sample]| v.iter().map(|s| (s.id.clone(), s.split)).collect::<Vec<_>>();
    assert_ne!(splits(&a.samples), splits(&b.samples));
    assert_eq!(split_sizes(30), (24, 3, 3));
}

#[test]
fn scope_adds_context() {
    let plain = build_corpus(&src(), &BuildOptions::default()).unwrap();
    let scoped = build_corpus(
        &src(),
        &BuildOptions {
            with_scope: true,
            ..BuildOptions::default()
        },
    )
    .unwrap();
    assert!(plain.samples.iter().all(|s| s.context_code.is_empty()));
    assert!(scoped.samples.iter().all(|s| !s.context_code.is_empty()));
    let s = scoped.samples.iter().find(|s| s.pragma_raw.as_deref() == Some("#pragma omp parallel for reduction(+:s)")).unwrap();
    assert!(s.context_code.contains("s = 0.0;"), "{}", s.context_code);
}

#[test]
fn benchmarks_are_held_out() {
    let opts = BuildOptions {
        benchmarks: Some(support::fixture("nas")),
        ..BuildOptions::default()
    };
    let build = build_corpus(&src(), &opts).unwrap();
    assert_eq!(build.benchmark_samples.len(), 6);
    let groups: HashSet<&str> = build.benchmark_samples.iter().map(|s| s.path.split('/').next().unwrap()).collect();
    assert_eq!(groups, HashSet::from(["BT", "CG", "EP"]));
    assert!(build.benchmark_samples.iter().all(|s| s.split == Split::Test));
    let main: HashSet<&str> = build.samples.iter().map(|s| s.id.as_str()).collect();
    assert!(build.benchmark_samples.iter().all(|s| !main.contains(s.id.as_str())));
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&build, dir.path()).unwrap();
    // the source offset is not serialized; compare the on-disk form
    let json = |v: &[ompadvisor::corpus::Sample]| serde_json::to_value(v).unwrap();
    assert_eq!(json(&read_samples(&dir.path().join("benchmarks.jsonl")).unwrap()), json(&build.benchmark_samples));
    assert_eq!(json(&read_samples(dir.path()).unwrap()), json(&build.samples));
}

#[test]
fn labels_follow_the_pragma() {
    let src = "void f(int n, double *a, double s, double t) {\n\
               #pragma omp parallel\n\
               {\n\
               #pragma omp for reduction(+:s) private(t)\n\
               for (int i = 0; i < n; i++) { t = a[i]; s += t; }\n\
               }\n\
               #pragma omp parallel for shared(a)\n\
               for (int i = 0; i < n; i++) a[i] = 2 * a[i];\n\
               for (int i = 0; i < n; i++) a[i] = a[i] + 1;\n}";
    let ex = extract_samples("f.c", src, false);
    let labels: Vec<[bool; 3]> = ex.samples.iter().map(|s| s.labels().as_array()).collect();
    assert_eq!(labels, [[true, true, true], [true, false, false], [false, false, false]]);
}
