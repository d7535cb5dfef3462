//! Oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use treeforge_core::baselang::{apply_binary, apply_unary, Type};
use treeforge_core::ctengine::TraceExpr;
use treeforge_core::irgen::const_value;
use treeforge_core::{IrModule, Node, Value};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

// ----- IR evaluator ----------------------------------------------------------

/// A direct-style evaluator for IR modules. It shares only the primitive
/// operator table with the interpreter.
pub struct IrEval<'a> {
    funcs: HashMap<&'a str, &'a treeforge_core::irgen::IrFunc>,
    pub max_depth: usize,
}

impl<'a> IrEval<'a> {
    pub fn new(ir: &'a IrModule) -> Self {
        IrEval {
            funcs: ir.functions().map(|f| (f.name.as_str(), f)).collect(),
            max_depth: 400,
        }
    }

    pub fn call(&self, name: &str, args: &[Value]) -> Result<Value, String> {
        self.call_at(name, args, 0)
    }

    fn call_at(&self, name: &str, args: &[Value], depth: usize) -> Result<Value, String> {
        if depth > self.max_depth {
            return Err("depth".into());
        }
        let f = self.funcs.get(name).ok_or_else(|| format!("no function {name}"))?;
        if f.params.len() != args.len() {
            return Err(format!("arity of {name}"));
        }
        let env: Vec<(String, Value)> = f
            .params
            .iter()
            .zip(args)
            .map(|((p, ty), a)| (p.clone(), widen(*a, *ty)))
            .collect();
        let v = self.eval(&f.body, &mut env.clone(), depth)?;
        Ok(widen(v, f.result))
    }

    fn eval(&self, n: &Node, env: &mut Vec<(String, Value)>, depth: usize) -> Result<Value, String> {
        if let Some(v) = const_value(n) {
            return Ok(v);
        }
        match n.alternative() {
            "VarRef" => {
                let name = n.text("name");
                env.iter()
                    .rev()
                    .find(|(k, _)| k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| format!("unbound {name}"))
            }
            "UnOp" => {
                let v = self.eval(n.child("operand"), env, depth)?;
                apply_unary(n.text("op"), v).map_err(|e| e.to_string())
            }
            "BinOp" => {
                let op = n.text("op");
                let l = self.eval(n.child("left"), env, depth)?;
                if op == "and" || op == "or" {
                    let lb = l.as_bool().ok_or("non-bool operand")?;
                    if (op == "and") != lb {
                        return Ok(Value::Bool(lb));
                    }
                    let r = self.eval(n.child("right"), env, depth)?;
                    return r.as_bool().map(Value::Bool).ok_or_else(|| "non-bool operand".into());
                }
                let r = self.eval(n.child("right"), env, depth)?;
                apply_binary(op, l, r).map_err(|e| e.to_string())
            }
            "If" => match self.eval(n.child("cond"), env, depth)? {
                Value::Bool(true) => self.eval(n.child("then"), env, depth),
                Value::Bool(false) => self.eval(n.child("else"), env, depth),
                _ => Err("non-bool condition".into()),
            },
            "Let" => {
                let v = self.eval(n.child("bound"), env, depth)?;
                env.push((n.text("name").to_string(), v));
                let r = self.eval(n.child("body"), env, depth);
                env.pop();
                r
            }
            "Call" => {
                let mut args = Vec::new();
                for a in n.list("args") {
                    args.push(self.eval(a, env, depth)?);
                }
                self.call_at(n.text("name"), &args, depth + 1)
            }
            other => Err(format!("unknown IR node {other}")),
        }
    }
}

fn widen(v: Value, ty: Type) -> Value {
    match (v, ty) {
        (Value::Int(i), Type::Real) => Value::Real(i as f64),
        (v, _) => v,
    }
}

/// Values agree exactly for ints and bools and within `tol` for reals.
pub fn values_agree(a: Value, b: Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Real(x), Value::Real(y)) => (x - y).abs() <= tol || x == y,
        _ => a == b,
    }
}

/// Every argument tuple over `range` for `arity` int parameters.
pub fn int_grid(arity: usize, range: std::ops::RangeInclusive<i64>) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                range.clone().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(Value::Int(v));
                    p
                })
            })
            .collect();
    }
    out
}

// ----- combinatorial expansion oracle ----------------------------------------

/// The words an expression denotes, built by unrolling repetition into
/// explicit alternatives of sequences.
pub fn trace_words(e: &TraceExpr) -> Vec<Vec<String>> {
    match e {
        TraceExpr::Call(c) => vec![vec![c.to_string()]],
        TraceExpr::Seq(es) => seq_words(es.iter().map(trace_words).collect()),
        TraceExpr::Alt(es) => es.iter().flat_map(trace_words).collect(),
        TraceExpr::Repeat { inner, lo, hi } => {
            let w = trace_words(inner);
            (*lo..=*hi)
                .flat_map(|k| seq_words(vec![w.clone(); k as usize]))
                .collect()
        }
    }
}

/// Cartesian product by mixed-radix counting.
fn seq_words(parts: Vec<Vec<Vec<String>>>) -> Vec<Vec<String>> {
    if parts.iter().any(|p| p.is_empty()) {
        return Vec::new();
    }
    let total: usize = parts.iter().map(|p| p.len()).product();
    (0..total)
        .map(|mut i| {
            let mut digits = vec![0; parts.len()];
            for (d, p) in digits.iter_mut().zip(&parts).rev() {
                *d = i % p.len();
                i /= p.len();
            }
            digits
                .iter()
                .zip(&parts)
                .flat_map(|(d, p)| p[*d].iter().cloned())
                .collect()
        })
        .collect()
}

/// Every expression over the calls `a()` and `b()` with at most `ops`
/// operators and repetition bounds at most `max_bound`.
pub fn all_trace_exprs(ops: usize, max_bound: u32) -> Vec<TraceExpr> {
    let mut by_ops: Vec<Vec<TraceExpr>> = Vec::new();
    for n in 0..=ops {
        let mut level = Vec::new();
        if n == 0 {
            for op in ["a", "b"] {
                level.push(TraceExpr::Call(treeforge_core::ctengine::Call {
                    op: op.to_string(),
                    args: Vec::new(),
                }));
            }
        } else {
            for inner in &by_ops[n - 1] {
                for lo in 0..=max_bound {
                    for hi in lo..=max_bound {
                        level.push(TraceExpr::Repeat {
                            inner: Box::new(inner.clone()),
                            lo,
                            hi,
                        });
                    }
                }
            }
            for i in 0..n {
                for l in &by_ops[i] {
                    for r in &by_ops[n - 1 - i] {
                        level.push(TraceExpr::Seq(vec![l.clone(), r.clone()]));
                        level.push(TraceExpr::Alt(vec![l.clone(), r.clone()]));
                    }
                }
            }
        }
        by_ops.push(level);
    }
    by_ops.into_iter().flatten().collect()
}

// ----- water tank reference --------------------------------------------------

/// The tank scenario computed as one loop: the controller samples the level
/// the plant reached at the previous step, then the plant takes one Euler
/// step with the valve the controller left. Returns `(level, valve)` per step.
pub fn tank_reference(steps: usize) -> Vec<(f64, i64)> {
    let h = 0.1;
    let mut level = 2.5;
    let mut valve = 0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        if level >= 3.0 {
            valve = 1;
        } else if level <= 2.0 {
            valve = 0;
        }
        level += h * (0.5 - if valve == 1 { 1.0 } else { 0.0 });
        out.push((level, valve));
    }
    out
}

// ----- random hybrid models --------------------------------------------------

fn int_exp(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 {
        return match rng.gen_range(0..3) {
            0 => rng.gen_range(0..20).to_string(),
            1 => "x".into(),
            _ => "y".into(),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..7) {
        0 => format!("({} + {})", int_exp(rng, d), int_exp(rng, d)),
        1 => format!("({} * {})", int_exp(rng, d), int_exp(rng, d)),
        2 => format!("({} div {})", int_exp(rng, d), int_exp(rng, d)),
        3 => format!("sq({})", int_exp(rng, d)),
        4 => format!("(if {} then {} else {})", bool_exp(rng, d), int_exp(rng, d), int_exp(rng, d)),
        5 => format!("(let t = {} in t - {})", int_exp(rng, d), int_exp(rng, d)),
        _ => int_exp(rng, 0),
    }
}

fn bool_exp(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 {
        return if rng.gen_bool(0.5) { "true".into() } else { "x < y".into() };
    }
    let d = depth - 1;
    match rng.gen_range(0..5) {
        0 => format!("({} < {})", int_exp(rng, d), int_exp(rng, d)),
        1 => format!("({} = {})", int_exp(rng, d), int_exp(rng, d)),
        2 => format!("({} and {})", bool_exp(rng, d), bool_exp(rng, d)),
        3 => format!("not ({})", bool_exp(rng, d)),
        _ => format!("({} or {})", bool_exp(rng, d), bool_exp(rng, d)),
    }
}

fn proc_text(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 {
        return if rng.gen_bool(0.5) { "Stop".into() } else { "Skip".into() };
    }
    let d = depth - 1;
    match rng.gen_range(0..5) {
        0 => format!("e{} -> {}", rng.gen_range(0..4), proc_text(rng, d)),
        1 => format!("({} [] {})", proc_text(rng, d), proc_text(rng, d)),
        2 => format!("({} ; {})", proc_text(rng, d), proc_text(rng, d)),
        _ => {
            let gd = rng.gen_range(1..4);
            format!("[{}] & ({})", bool_exp(rng, gd), proc_text(rng, d))
        }
    }
}

/// A well-typed Proc-L document with one randomly shaped process `P`.
pub fn random_hybrid_source(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    writeln!(s, "module Random\n\nvalues\n  x = 3\n  y = 11\n").unwrap();
    writeln!(s, "functions\n  sq: int -> int\n  sq(n) == n * n\n").unwrap();
    let depth = rng.gen_range(1..6);
    writeln!(s, "processes\n  process P = {}", proc_text(rng, depth)).unwrap();
    s
}
