mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use treeforge_core::astspec::Schema;
use treeforge_core::baselang::{parse_module, EvalOptions, Interpreter};
use treeforge_core::irgen::{
    self, callees, emit_pseudo, emit_pseudo_with, fold_constants, group_mutual_recursion, ir,
    pseudo_emitter, translate, IrDef, IrFunc,
};
use treeforge_core::treekit::{make_node, Analysis, Dispatcher};
use treeforge_core::{FieldValue, IrModule, Type, Value};

use common::{fixture, int_grid, values_agree, IrEval};

const IR_FIXTURES: [&str; 2] = ["callgraph.bl", "evenodd.bl"];

/// Mutual reachability over the call relation, by transitive closure.
fn reachability_classes(ir: &IrModule) -> BTreeSet<BTreeSet<String>> {
    let names: Vec<String> = ir.functions().map(|f| f.name.clone()).collect();
    let n = names.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, f) in ir.functions().enumerate() {
        for c in callees(&f.body) {
            if let Some(j) = names.iter().position(|x| *x == c) {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .filter_map(|i| {
            let class: BTreeSet<String> = (0..n)
                .filter(|&j| i == j || (reach[i][j] && reach[j][i]))
                .map(|j| names[j].clone())
                .collect();
            let recursive = class.len() > 1;
            recursive.then_some(class)
        })
        .collect()
}

fn agrees_with_interpreter(src: &str, ir: &IrModule) {
    let module = parse_module(src).unwrap();
    let interp = Interpreter::new(&module, EvalOptions::default()).unwrap();
    let eval = IrEval::new(ir);
    for f in &module.functions {
        for args in int_grid(f.params.len(), 0..=6) {
            let want = interp.call(&f.name, &args);
            let got = eval.call(&f.name, &args);
            match (want, got) {
                (Ok(w), Ok(g)) => assert!(values_agree(w, g, 1e-12), "{}{args:?}: {w} vs {g}", f.name),
                (Err(_), Err(_)) => {}
                (w, g) => panic!("{}{args:?}: interpreter {w:?}, IR {g:?}", f.name),
            }
        }
    }
}

#[test]
fn groups_are_mutual_reachability_classes() {
    for name in IR_FIXTURES {
        let ir = translate(&parse_module(&fixture(name)).unwrap()).unwrap();
        let grouped = group_mutual_recursion(ir.clone());
        let got: BTreeSet<_> = grouped.groups().into_iter().collect();
        assert_eq!(got, reachability_classes(&ir), "{name}");
        assert_eq!(group_mutual_recursion(grouped.clone()), grouped, "{name}");
    }
}

#[test]
fn fold_is_idempotent_and_keeps_faults() {
    for name in IR_FIXTURES {
        let ir = translate(&parse_module(&fixture(name)).unwrap()).unwrap();
        let once = fold_constants(ir);
        assert_eq!(fold_constants(once.clone()), once, "{name}");
    }
    let ir = translate(&parse_module("module M\nfunctions\n  f: int -> int\n  f(x) == 1 div 0 + x").unwrap()).unwrap();
    assert_eq!(emit_pseudo(&fold_constants(ir)), "module M\nfunc f(x) = (+ (div 1 0) x)\n");
}

#[test]
fn every_pass_preserves_meaning() {
    for name in IR_FIXTURES {
        let src = fixture(name);
        let ir = translate(&parse_module(&src).unwrap()).unwrap();
        agrees_with_interpreter(&src, &ir);
        let folded = fold_constants(ir.clone());
        agrees_with_interpreter(&src, &folded);
        agrees_with_interpreter(&src, &group_mutual_recursion(folded));
        agrees_with_interpreter(&src, &group_mutual_recursion(ir));
    }
}

#[test]
fn implicit_functions_are_not_generated() {
    let err = translate(&parse_module(&fixture("demo.bl")).unwrap()).unwrap_err();
    assert_eq!(err.to_string(), "ImplicitNotGeneratable: `isqrt` is implicitly defined and has no code");
}

#[test]
fn extension_category_gets_its_own_emitter() {
    let ext = Schema::compile_extension(
        irgen::schema(),
        "tree IrVec extends Ir\nnode VecExp =\n  | Pack(items: list base::IrExp)\n",
    )
    .unwrap();
    let x = ir("VarRef", vec![("name", FieldValue::ident("x"))]);
    let one = irgen::constant(Value::Int(1));
    let pack = make_node(&ext, "VecExp", "Pack", vec![("items", vec![one, x].into())]).unwrap();
    let module = IrModule {
        name: "V".into(),
        defs: vec![IrDef::Func(IrFunc {
            name: "v".into(),
            params: vec![("x".into(), Type::Int)],
            result: Type::Int,
            body: pack,
        })],
    };

    let vec_emitter: Analysis<(), String, std::convert::Infallible> =
        Analysis::new("IrVec").on("VecExp", "Pack", |n, ctx, d| {
            let items: Result<Vec<String>, _> = n.list("items").iter().map(|i| d.dispatch(i, ctx)).collect();
            Ok(format!("[{}]", items?.join(", ")))
        });
    let d = Dispatcher::new()
        .register(irgen::TREE_ID, pseudo_emitter())
        .and_then(|d| d.register("IrVec", vec_emitter))
        .unwrap();
    assert_eq!(emit_pseudo_with(&module, &d), "module V\nfunc v(x) = [1, x]\n");
    assert!(emit_pseudo(&module).contains("<"), "base emitter alone cannot route the extension node");
}

fn arb_graph() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (1usize..=8).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0..n, 0..4), n))
}

fn module_for(edges: &[Vec<usize>]) -> String {
    let mut s = String::from("module G\nfunctions\n");
    for (i, outs) in edges.iter().enumerate() {
        let mut body = format!("{i}");
        for j in outs {
            body = format!("{body} + f{j}(n - 1)");
        }
        s.push_str(&format!("  f{i}: int -> int\n  f{i}(n) == if n <= 0 then {i} else {body}\n"));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_call_graphs_group_and_evaluate(edges in arb_graph()) {
        let src = module_for(&edges);
        let ir = translate(&parse_module(&src).unwrap()).unwrap();
        let grouped = group_mutual_recursion(fold_constants(ir.clone()));
        let got: BTreeSet<_> = grouped.groups().into_iter().collect();
        prop_assert_eq!(got, reachability_classes(&ir));
        let module = parse_module(&src).unwrap();
        let interp = Interpreter::new(&module, EvalOptions::default()).unwrap();
        let eval = IrEval::new(&grouped);
        for i in 0..edges.len() {
            for n in 0..4 {
                let name = format!("f{i}");
                prop_assert_eq!(interp.call(&name, &[Value::Int(n)]).ok(), eval.call(&name, &[Value::Int(n)]).ok());
            }
        }
    }
}
