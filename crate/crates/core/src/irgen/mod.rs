//! Code-generation IR: translation from Base-L, transformation passes and a
//! reference text backend.
//!
//! IR expressions are ordinary [`Node`]s over the `Ir` schema, so backends
//! are dispatcher analyses and the IR can be extended like any other tree.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::convert::Infallible;
use std::sync::OnceLock;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::astspec::Schema;
use crate::baselang::{self, apply_binary, apply_unary, type_check_exp, BaseModule, Type, Value};
use crate::treekit::{make_node, traverse, Analysis, DispatchError, Dispatcher, FieldValue, Node, Order};

/// Tree id of the IR schema.
pub const TREE_ID: &str = "Ir";

/// The bundled IR tree specification.
pub const SPEC: &str = include_str!("../../specs/ir.ast");

pub fn schema() -> &'static Schema {
    static SCHEMA: OnceLock<Schema> = OnceLock::new();
    SCHEMA.get_or_init(|| Schema::compile(SPEC).expect("bundled IR spec compiles"))
}

/// Builds an IR expression node.
pub fn ir(alt: &str, fields: Vec<(&str, FieldValue)>) -> Node {
    make_node(schema(), "IrExp", alt, fields).expect("well-formed IR node")
}

pub fn constant(v: Value) -> Node {
    match v {
        Value::Int(i) => ir("IntConst", vec![("value", FieldValue::int(i))]),
        Value::Real(r) => ir("RealConst", vec![("value", FieldValue::real(r))]),
        Value::Bool(b) => ir("BoolConst", vec![("value", FieldValue::bool(b))]),
    }
}

/// The value of a constant node, if it is one.
pub fn const_value(n: &Node) -> Option<Value> {
    match n.alternative() {
        "IntConst" => Some(Value::Int(n.int("value"))),
        "RealConst" => Some(Value::Real(n.real("value"))),
        "BoolConst" => Some(Value::Bool(n.bool("value"))),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrFunc {
    pub name: String,
    pub params: Vec<(String, Type)>,
    pub result: Type,
    pub body: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrDef {
    Func(IrFunc),
    /// Mutually recursive functions that a backend must emit together.
    Group(Vec<IrFunc>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrModule {
    pub name: String,
    pub defs: Vec<IrDef>,
}

impl IrModule {
    /// Every function in definition order, group members included.
    pub fn functions(&self) -> impl Iterator<Item = &IrFunc> {
        self.defs.iter().flat_map(|d| match d {
            IrDef::Func(f) => std::slice::from_ref(f).iter(),
            IrDef::Group(fs) => fs.iter(),
        })
    }

    pub fn function(&self, name: &str) -> Option<&IrFunc> {
        self.functions().find(|f| f.name == name)
    }

    /// Names of the groups' members, one set per group.
    pub fn groups(&self) -> Vec<BTreeSet<String>> {
        self.defs
            .iter()
            .filter_map(|d| match d {
                IrDef::Group(fs) => Some(fs.iter().map(|f| f.name.clone()).collect()),
                IrDef::Func(_) => None,
            })
            .collect()
    }

    fn map_functions(self, mut f: impl FnMut(IrFunc) -> IrFunc) -> IrModule {
        IrModule {
            name: self.name,
            defs: self
                .defs
                .into_iter()
                .map(|d| match d {
                    IrDef::Func(x) => IrDef::Func(f(x)),
                    IrDef::Group(xs) => IrDef::Group(xs.into_iter().map(&mut f).collect()),
                })
                .collect(),
        }
    }
}

/// Names called anywhere in `body`.
pub fn callees(body: &Node) -> BTreeSet<String> {
    traverse(body, Order::Pre)
        .iter()
        .filter(|n| n.alternative() == "Call")
        .map(|n| n.text("name").to_string())
        .collect()
}

/// Variables referenced in `body` that no enclosing `Let` binds.
pub fn free_vars(body: &Node) -> BTreeSet<String> {
    fn go(n: &Node, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match n.alternative() {
            "VarRef" => {
                let name = n.text("name");
                if !bound.iter().any(|b| b == name) {
                    out.insert(name.to_string());
                }
            }
            "Let" => {
                go(n.child("bound"), bound, out);
                bound.push(n.text("name").to_string());
                go(n.child("body"), bound, out);
                bound.pop();
            }
            _ => n.children().for_each(|c| go(c, bound, out)),
        }
    }
    let mut out = BTreeSet::new();
    go(body, &mut Vec::new(), &mut out);
    out
}

/// Violations of the module invariants: unique function names and existing
/// call targets.
pub fn check_module(ir: &IrModule) -> Vec<String> {
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for f in ir.functions() {
        if !seen.insert(f.name.as_str()) {
            problems.push(format!("duplicate function `{}`", f.name));
        }
    }
    for f in ir.functions() {
        for c in callees(&f.body) {
            if !seen.contains(c.as_str()) {
                problems.push(format!("`{}` calls undefined `{c}`", f.name));
            }
        }
    }
    problems
}

// ----- translation -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("ImplicitNotGeneratable: `{0}` is implicitly defined and has no code")]
    ImplicitNotGeneratable(String),
    #[error("unknown pass `{0}` (expected `fold` or `group`)")]
    UnknownPass(String),
}

/// Names bound by parameters and lets, versus module values that become
/// zero-argument calls.
#[derive(Default)]
pub struct TranslateCtx {
    locals: Vec<String>,
    values: HashSet<String>,
}

type TrResult = Result<Node, DispatchError<Infallible>>;

/// Base-L to IR translation as a dispatchable analysis over Base-L.
pub fn translator() -> Analysis<TranslateCtx, Node, Infallible> {
    Analysis::new(baselang::TREE_ID)
        .on("Exp", "IntLit", |n, _, _| Ok(constant(Value::Int(n.int("value")))))
        .on("Exp", "RealLit", |n, _, _| Ok(constant(Value::Real(n.real("value")))))
        .on("Exp", "BoolLit", |n, _, _| Ok(constant(Value::Bool(n.bool("value")))))
        .on("Exp", "Var", |n, ctx: &mut TranslateCtx, _| {
            let name = n.text("name");
            Ok(if !ctx.locals.iter().any(|l| l == name) && ctx.values.contains(name) {
                ir("Call", vec![("name", FieldValue::ident(name)), ("args", Vec::<Node>::new().into())])
            } else {
                ir("VarRef", vec![("name", FieldValue::ident(name))])
            })
        })
        .on("Exp", "Unary", |n, ctx, d| -> TrResult {
            let operand = d.dispatch(n.child("operand"), ctx)?;
            Ok(ir("UnOp", vec![("op", FieldValue::ident(n.text("op"))), ("operand", operand.into())]))
        })
        .on("Exp", "Binary", |n, ctx, d| -> TrResult {
            let left = d.dispatch(n.child("left"), ctx)?;
            let right = d.dispatch(n.child("right"), ctx)?;
            Ok(ir(
                "BinOp",
                vec![("op", FieldValue::ident(n.text("op"))), ("left", left.into()), ("right", right.into())],
            ))
        })
        .on("Exp", "If", |n, ctx, d| -> TrResult {
            let c = d.dispatch(n.child("cond"), ctx)?;
            let t = d.dispatch(n.child("then"), ctx)?;
            let e = d.dispatch(n.child("else"), ctx)?;
            Ok(ir("If", vec![("cond", c.into()), ("then", t.into()), ("else", e.into())]))
        })
        .on("Exp", "Let", |n, ctx, d| -> TrResult {
            let bound = d.dispatch(n.child("bound"), ctx)?;
            ctx.locals.push(n.text("name").to_string());
            let body = d.dispatch(n.child("body"), ctx);
            ctx.locals.pop();
            Ok(ir(
                "Let",
                vec![("name", FieldValue::ident(n.text("name"))), ("bound", bound.into()), ("body", body?.into())],
            ))
        })
        .on("Exp", "Apply", |n, ctx, d| -> TrResult {
            let mut args = Vec::new();
            for a in n.list("args") {
                args.push(d.dispatch(a, ctx)?);
            }
            Ok(ir("Call", vec![("name", FieldValue::ident(n.text("name"))), ("args", args.into())]))
        })
}

/// Translates the functions and values of `module`. Values become
/// zero-parameter functions; contracts, state and operations are not
/// translated.
pub fn translate(module: &BaseModule) -> Result<IrModule, IrError> {
    if let Some(f) = module.functions.iter().find(|f| f.is_implicit()) {
        return Err(IrError::ImplicitNotGeneratable(f.name.clone()));
    }
    let d = Dispatcher::new()
        .register(baselang::TREE_ID, translator())
        .expect("fresh dispatcher");
    let mut ctx = TranslateCtx {
        locals: Vec::new(),
        values: module.values.iter().map(|v| v.name.clone()).collect(),
    };
    let run = |ctx: &mut TranslateCtx, exp: &Node| d.dispatch(exp, ctx).expect("translation is total");

    let mut defs = Vec::new();
    for def in &module.defs {
        match def.alternative() {
            "ValueDef" => {
                let v = module.values.iter().find(|v| v.node.ptr_eq(def)).expect("value view");
                let (ty, _) = type_check_exp(module, &v.exp);
                defs.push(IrDef::Func(IrFunc {
                    name: v.name.clone(),
                    params: Vec::new(),
                    result: ty.unwrap_or(Type::Int),
                    body: run(&mut ctx, &v.exp),
                }));
            }
            "ExplicitFn" => {
                let f = module.functions.iter().find(|f| f.node.ptr_eq(def)).expect("function view");
                ctx.locals = f.params.iter().map(|p| p.name.clone()).collect();
                let body = run(&mut ctx, f.body.as_ref().expect("explicit body"));
                ctx.locals.clear();
                defs.push(IrDef::Func(IrFunc {
                    name: f.name.clone(),
                    params: f.params.iter().map(|p| (p.name.clone(), p.ty)).collect(),
                    result: f.result,
                    body,
                }));
            }
            _ => {}
        }
    }
    Ok(IrModule {
        name: module.name.clone(),
        defs,
    })
}

// ----- passes ----------------------------------------------------------------

fn fold_exp(n: &Node) -> Node {
    let rebuilt = |n: &Node| -> Node {
        let fields: Vec<(&str, FieldValue)> = n
            .fields()
            .iter()
            .map(|(name, v)| {
                let v = match v {
                    FieldValue::Node(c) => FieldValue::Node(fold_exp(c)),
                    FieldValue::List(cs) => FieldValue::List(cs.iter().map(fold_exp).collect()),
                    other => other.clone(),
                };
                (name.as_str(), v)
            })
            .collect();
        ir(n.alternative(), fields)
    };
    let n = rebuilt(n);
    let folded = match n.alternative() {
        "BinOp" => match (const_value(n.child("left")), const_value(n.child("right"))) {
            (Some(l), Some(r)) => apply_binary(n.text("op"), l, r).ok(),
            _ => None,
        },
        "UnOp" => const_value(n.child("operand")).and_then(|v| apply_unary(n.text("op"), v).ok()),
        "If" => match const_value(n.child("cond")) {
            Some(Value::Bool(true)) => return n.child("then").clone(),
            Some(Value::Bool(false)) => return n.child("else").clone(),
            _ => None,
        },
        _ => None,
    };
    match folded {
        Some(Value::Real(r)) if !r.is_finite() => n,
        Some(v) => constant(v),
        None => n,
    }
}

/// Folds operators over constants and conditionals over constant conditions,
/// bottom-up, to a fixpoint. Faulting operations such as division by zero
/// are left in place.
pub fn fold_constants(ir: IrModule) -> IrModule {
    ir.map_functions(|f| {
        let mut body = f.body;
        loop {
            let next = fold_exp(&body);
            if next.to_string() == body.to_string() {
                break;
            }
            body = next;
        }
        IrFunc { body, ..f }
    })
}

/// Strongly connected components of the graph `edges` over nodes `0..n`,
/// each sorted ascending, in no particular order.
pub fn strongly_connected(n: usize, edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let ids: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (from, tos) in edges.iter().enumerate() {
        for &to in tos {
            g.add_edge(ids[from], ids[to], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|comp| {
            let mut c: Vec<usize> = comp.into_iter().map(|id| id.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Regroups functions so that each strongly connected component of the call
/// graph with two or more members forms one group. Existing groups are
/// dissolved first; self-recursive singletons stay plain functions. Output
/// order follows the first member of each component.
pub fn group_mutual_recursion(ir: IrModule) -> IrModule {
    let funcs: Vec<IrFunc> = ir.functions().cloned().collect();
    let pos: HashMap<&str, usize> = funcs.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
    let edges: Vec<Vec<usize>> = funcs
        .iter()
        .map(|f| callees(&f.body).iter().filter_map(|c| pos.get(c.as_str()).copied()).collect())
        .collect();
    let mut comp_of = vec![0; funcs.len()];
    let comps = strongly_connected(funcs.len(), &edges);
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            comp_of[m] = c;
        }
    }
    let mut defs = Vec::new();
    for (i, f) in funcs.iter().enumerate() {
        let members = &comps[comp_of[i]];
        if members[0] != i {
            continue;
        }
        if members.len() == 1 {
            defs.push(IrDef::Func(f.clone()));
        } else {
            defs.push(IrDef::Group(members.iter().map(|&m| funcs[m].clone()).collect()));
        }
    }
    IrModule { name: ir.name, defs }
}

/// A named module-to-module transformation.
#[derive(Clone, Copy)]
pub struct Pass {
    pub name: &'static str,
    pub transform: fn(IrModule) -> IrModule,
}

pub const FOLD: Pass = Pass {
    name: "fold",
    transform: fold_constants,
};

pub const GROUP: Pass = Pass {
    name: "group",
    transform: group_mutual_recursion,
};

/// The default pipeline: constant folding, then grouping.
pub fn default_passes() -> Vec<Pass> {
    vec![FOLD, GROUP]
}

/// Parses a comma-separated pass list such as `fold,group`. An empty string
/// selects no passes.
pub fn parse_passes(list: &str) -> Result<Vec<Pass>, IrError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "fold" => Ok(FOLD),
            "group" => Ok(GROUP),
            other => Err(IrError::UnknownPass(other.to_string())),
        })
        .collect()
}

pub fn run_passes(ir: IrModule, passes: &[Pass]) -> IrModule {
    passes.iter().fold(ir, |m, p| (p.transform)(m))
}

// ----- backend ---------------------------------------------------------------

pub type EmitDispatcher = Dispatcher<(), String, Infallible>;
type EmitResult = Result<String, DispatchError<Infallible>>;

fn sexp(d: &EmitDispatcher, head: &str, parts: &[&Node]) -> EmitResult {
    let mut out = format!("({head}");
    for p in parts {
        out.push(' ');
        out.push_str(&d.dispatch(p, &mut ())?);
    }
    out.push(')');
    Ok(out)
}

/// The pseudo-code backend for IR expressions: fully parenthesised prefix
/// form.
pub fn pseudo_emitter() -> Analysis<(), String, Infallible> {
    Analysis::new(TREE_ID)
        .on("IrExp", "IntConst", |n, _, _| Ok(n.int("value").to_string()))
        .on("IrExp", "RealConst", |n, _, _| Ok(format!("{:?}", n.real("value"))))
        .on("IrExp", "BoolConst", |n, _, _| Ok(n.bool("value").to_string()))
        .on("IrExp", "VarRef", |n, _, _| Ok(n.text("name").to_string()))
        .on("IrExp", "UnOp", |n, _, d| sexp(d, n.text("op"), &[n.child("operand")]))
        .on("IrExp", "BinOp", |n, _, d| sexp(d, n.text("op"), &[n.child("left"), n.child("right")]))
        .on("IrExp", "If", |n, _, d| {
            sexp(d, "if", &[n.child("cond"), n.child("then"), n.child("else")])
        })
        .on("IrExp", "Let", |n, _, d| {
            sexp(d, &format!("let {}", n.text("name")), &[n.child("bound"), n.child("body")])
        })
        .on("IrExp", "Call", |n, _, d| {
            let args: Vec<&Node> = n.list("args").iter().collect();
            sexp(d, &format!("call {}", n.text("name")), &args)
        })
}

pub fn pseudo_dispatcher() -> EmitDispatcher {
    Dispatcher::new()
        .register(TREE_ID, pseudo_emitter())
        .expect("fresh dispatcher")
}

fn emit_func(f: &IrFunc, d: &EmitDispatcher) -> String {
    let params: Vec<&str> = f.params.iter().map(|(n, _)| n.as_str()).collect();
    let body = d.dispatch(&f.body, &mut ()).unwrap_or_else(|e| format!("<{e}>"));
    format!("func {}({}) = {body}", f.name, params.join(", "))
}

/// Renders `ir` with the expression emitter registered in `d`.
pub fn emit_pseudo_with(ir: &IrModule, d: &EmitDispatcher) -> String {
    let mut out = format!("module {}\n", ir.name);
    for def in &ir.defs {
        match def {
            IrDef::Func(f) => {
                out.push_str(&emit_func(f, d));
                out.push('\n');
            }
            IrDef::Group(fs) => {
                out.push_str("group {\n");
                for f in fs {
                    out.push_str("  ");
                    out.push_str(&emit_func(f, d));
                    out.push('\n');
                }
                out.push_str("}\n");
            }
        }
    }
    out
}

/// Renders `ir` as neutral pseudo code.
pub fn emit_pseudo(ir: &IrModule) -> String {
    emit_pseudo_with(ir, &pseudo_dispatcher())
}
