mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ompadvisor::dfg::{build_dfg, OccurrenceKind};
use ompadvisor::syntax::parse_statements;

fn check(seed: u64, max_stmts: usize, max_vars: usize) -> Result<(), TestCaseError> {
    let p = support::random_program(&mut ChaCha8Rng::seed_from_u64(seed), max_stmts, max_vars);
    let src = p.source();
    let (block, tokens) = parse_statements(&src).unwrap();
    let g = build_dfg(&block, &tokens);
    let tok: Vec<usize> = g.nodes.iter().map(|n| n.code_token_index).collect();
    let nodes: Vec<(usize, String)> = g.nodes.iter().map(|n| (n.code_token_index, n.var_name.clone())).collect();
    prop_assert_eq!(nodes, support::oracle_nodes(&p), "{}", src);
    let edges: BTreeSet<(usize, usize)> = g.edges.iter().map(|&(a, b)| (tok[a], tok[b])).collect();
    prop_assert_eq!(edges, support::oracle_edges(&p), "{}", src);
    // defs are exactly the statement targets
    let defs: BTreeSet<usize> = g
        .nodes
        .iter()
        .filter(|n| n.occurrence_kind == OccurrenceKind::Def)
        .map(|n| n.code_token_index)
        .collect();
    let targets: BTreeSet<usize> = p
        .stmts
        .iter()
        .flat_map(|s| s.occs.iter().filter(|o| o.role == support::Role::Target).map(|o| o.tok))
        .collect();
    prop_assert_eq!(defs, targets);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_reaching_definitions_oracle(seed in any::<u64>()) {
        check(seed, 10, 6)?;
    }

    #[test]
    fn matches_oracle_on_longer_programs(seed in any::<u64>()) {
        check(seed, 25, 8)?;
    }
}

#[test]
fn edges_are_sorted_unique_and_in_range() {
    let (block, tokens) = parse_statements("x = y + y; y = x * x; x += y;").unwrap();
    let g = build_dfg(&block, &tokens);
    let mut sorted = g.edges.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, g.edges);
    assert!(g.edges.iter().all(|&(a, b)| a < g.nodes.len() && b < g.nodes.len() && a != b));
}
