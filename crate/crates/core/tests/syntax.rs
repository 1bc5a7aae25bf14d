mod support;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ompadvisor::syntax::{parse_omp_pragma, parse_source, parse_statements, render, Directive};

const VARS: [&str; 6] = ["i", "j", "n", "s", "t", "x"];
const ARRAYS: [&str; 3] = ["a", "b", "c"];

fn expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => rng.gen_range(0..1000).to_string(),
            1 => format!("{}.5", rng.gen_range(0..10)),
            2 => format!("{}[{}]", ARRAYS.choose(rng).unwrap(), VARS.choose(rng).unwrap()),
            _ => VARS.choose(rng).unwrap().to_string(),
        };
    }
    match rng.gen_range(0..6) {
        0 => format!("({})", expr(rng, depth - 1)),
        1 => format!("{}{}", ["-", "!"].choose(rng).unwrap(), expr(rng, depth - 1)),
        2 => format!("f({}, {})", expr(rng, depth - 1), expr(rng, depth - 1)),
        3 => format!("{}[{}]", ARRAYS.choose(rng).unwrap(), expr(rng, depth - 1)),
        _ => {
            let op = ["+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=", "&&", "||"]
                .choose(rng)
                .unwrap();
            format!("{} {op} {}", expr(rng, depth - 1), expr(rng, depth - 1))
        }
    }
}

fn lvalue(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.5) {
        VARS.choose(rng).unwrap().to_string()
    } else {
        format!("{}[{}]", ARRAYS.choose(rng).unwrap(), expr(rng, 1))
    }
}

fn stmt(rng: &mut ChaCha8Rng, depth: u32, out: &mut Vec<String>) {
    let simple = depth == 0 || rng.gen_bool(0.5);
    if simple {
        let s = match rng.gen_range(0..6) {
            0 => format!("{} = {};", lvalue(rng), expr(rng, 2)),
            1 => format!("{} {} {};", lvalue(rng), ["+=", "-=", "*=", "/="].choose(rng).unwrap(), expr(rng, 2)),
            2 => format!("{}{};", VARS.choose(rng).unwrap(), ["++", "--"].choose(rng).unwrap()),
            3 => format!("double {} = {};", VARS.choose(rng).unwrap(), expr(rng, 2)),
            4 => format!("g({});", expr(rng, 2)),
            _ => format!("return {};", expr(rng, 1)),
        };
        out.push(s);
        return;
    }
    match rng.gen_range(0..4) {
        0 => {
            if rng.gen_bool(0.5) {
                out.push("#pragma omp parallel for private(t) reduction(+:s)".into());
            }
            let v = VARS.choose(rng).unwrap();
            out.push(format!("for ({v} = 0; {v} < {}; {v}++) {{", expr(rng, 1)));
            block(rng, depth - 1, out);
            out.push("}".into());
        }
        1 => {
            out.push(format!("if ({}) {{", expr(rng, 2)));
            block(rng, depth - 1, out);
            if rng.gen_bool(0.5) {
                out.push("} else {".into());
                block(rng, depth - 1, out);
            }
            out.push("}".into());
        }
        2 => {
            out.push(format!("while ({}) {{", expr(rng, 2)));
            block(rng, depth - 1, out);
            out.push("}".into());
        }
        _ => {
            let v = VARS.choose(rng).unwrap();
            out.push(format!("for (int {v} = 0; {v} < n; {v} += 2)"));
            stmt(rng, 0, out);
        }
    }
}

fn block(rng: &mut ChaCha8Rng, depth: u32, out: &mut Vec<String>) {
    for _ in 0..rng.gen_range(1..4) {
        stmt(rng, depth, out);
    }
}

fn program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = vec![
        "double f(double u, double v);".to_string(),
        "void kernel(int n, double *a, double b[], double c[100]) {".to_string(),
        "int i, j, k;".to_string(),
        "double s = 0.0, t, x;".to_string(),
    ];
    block(&mut rng, 3, &mut lines);
    lines.push("}".into());
    lines.join("\n")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_round_trips(seed in any::<u64>()) {
        let src = program(seed);
        let (ast, _) = parse_source(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        let once = render(&ast);
        let (again, _) = parse_source(&once).map_err(|e| TestCaseError::fail(format!("{e}\n{once}")))?;
        prop_assert!(ast.structurally_eq(&again), "{}\n---\n{}", src, once);
        prop_assert_eq!(render(&again), once);
    }
}

#[test]
fn statement_lists_round_trip() {
    let src = "s = 0;\nfor (i = 0; i < n; i++) {\ns += a[i] * b[i];\n}";
    let (block, _) = parse_statements(src).unwrap();
    let out = ompadvisor::syntax::render_statements(&block.children);
    assert_eq!(out, src);
}

#[test]
fn parse_errors_carry_a_line() {
    let err = parse_source("void f() {\n  x = ;\n}").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(parse_source("void f() { for (i = 0; i < n; i++) ").is_err());
}

#[test]
fn pragma_fixture_parses_exactly() {
    let text = std::fs::read_to_string(support::fixture("pragmas.json")).unwrap();
    let cases: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(cases.len(), 30);
    for c in &cases {
        let input = c["input"].as_str().unwrap();
        let p = parse_omp_pragma(input).unwrap_or_else(|e| panic!("{input:?}: {e}"));
        assert_eq!(serde_json::to_value(p.directive).unwrap(), c["directive"], "{input:?}");
        assert_eq!(serde_json::to_value(&p.clauses).unwrap(), c["clauses"], "{input:?}");
        assert_eq!(p.raw, input);
    }
}

#[test]
fn malformed_pragmas_are_errors() {
    for bad in [
        "#pragma omp parallel for reduction(:s)",
        "#pragma omp parallel for reduction(+:)",
        "#pragma omp parallel for reduction(%:s)",
        "#pragma omp parallel for private(i",
        "#pragma acc parallel loop",
    ] {
        assert!(parse_omp_pragma(bad).is_err(), "{bad}");
    }
    let p = parse_omp_pragma("#pragma omp single").unwrap();
    assert_eq!(p.directive, Directive::Other);
}
