mod common;

use treeforge_core::baselang::{
    evaluate, parse_module, solve_implicit, EvalMode, EvalOptions, Interpreter, RuntimeError,
    DEFAULT_BOUNDS,
};
use treeforge_core::Value;

use common::fixture;

fn isqrt_scan(x: i64) -> i64 {
    let mut r = 0;
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

#[test]
fn strict_mode_refuses_every_implicit_function() {
    for name in ["demo.bl", "divisions.bl"] {
        let module = parse_module(&fixture(name)).unwrap();
        let interp = Interpreter::new(&module, EvalOptions::default()).unwrap();
        let implicit: Vec<_> = module.functions.iter().filter(|f| f.is_implicit()).collect();
        assert!(!implicit.is_empty());
        for f in implicit {
            let err = interp.call(&f.name, &[Value::Int(9)]).unwrap_err();
            assert!(
                matches!(&err.error, RuntimeError::ImplicitEvaluation { function } if *function == f.name),
                "{err}"
            );
        }
    }
}

#[test]
fn solve_mode_matches_scan() {
    let module = parse_module(&fixture("demo.bl")).unwrap();
    let interp = Interpreter::new(&module, EvalOptions::solve(DEFAULT_BOUNDS)).unwrap();
    for x in 0..=100 {
        let want = Value::Int(isqrt_scan(x));
        assert_eq!(interp.call("isqrt", &[Value::Int(x)]).unwrap(), want, "isqrt({x})");
        assert_eq!(interp.call("isqrt_explicit", &[Value::Int(x)]).unwrap(), want);
        assert_eq!(solve_implicit(&module, "isqrt", &[Value::Int(x)], DEFAULT_BOUNDS).unwrap(), want);
    }
}

#[test]
fn halve_picks_the_smallest_witness() {
    let module = parse_module(&fixture("demo.bl")).unwrap();
    for x in -9..=9i64 {
        let got = evaluate(&module, &format!("halve({x})"), EvalMode::Solve, DEFAULT_BOUNDS).unwrap();
        assert_eq!(got, Value::Int(x.div_euclid(2)), "halve({x})");
    }
}

#[test]
fn narrow_bounds_report_no_solution() {
    let module = parse_module(&fixture("demo.bl")).unwrap();
    let err = solve_implicit(&module, "isqrt", &[Value::Int(50)], (-2, 2)).unwrap_err();
    assert!(matches!(err.error, RuntimeError::NoSolutionInBounds { lo: -2, hi: 2, .. }), "{err}");
}
