use std::collections::{HashMap, HashSet};
use std::convert::Infallible;

use super::{BaseModule, Type, TREE_ID};
use crate::ctengine::parse_trace_expr;
use crate::span::Span;
use crate::treekit::{Analysis, DispatchError, Diagnostic, Dispatcher, Node};

type TcResult = Result<Option<Type>, DispatchError<Infallible>>;
pub type TypeDispatcher = Dispatcher<TypeCtx, Option<Type>, Infallible>;

/// Typing environment and diagnostic sink shared by every type-checking
/// analysis in a run. Handlers yield `None` for ill-typed nodes after
/// reporting, so errors are not repeated up the tree.
#[derive(Debug, Default)]
pub struct TypeCtx {
    functions: HashMap<String, (Vec<Type>, Type)>,
    values: HashMap<String, Type>,
    state: HashMap<String, Type>,
    state_visible: bool,
    scopes: Vec<(String, Type)>,
    pub diagnostics: Vec<Diagnostic>,
    /// Embedded nodes whose types an extension analysis chose to record.
    pub observed: Vec<(Node, Option<Type>)>,
}

impl TypeCtx {
    /// Context with the module's function signatures and state types. Value
    /// types are filled in by [`TypeCtx::check_values`].
    pub fn for_module(module: &BaseModule) -> TypeCtx {
        let mut ctx = TypeCtx::default();
        for f in &module.functions {
            ctx.functions
                .entry(f.name.clone())
                .or_insert_with(|| (f.params.iter().map(|p| p.ty).collect(), f.result));
        }
        for s in &module.state {
            ctx.state.entry(s.name.clone()).or_insert(s.ty);
        }
        ctx
    }

    /// Types the module's `values` in order; each sees only earlier values.
    pub fn check_values(&mut self, module: &BaseModule, d: &TypeDispatcher) {
        for v in &module.values {
            let ty = self.check(d, &v.exp);
            if let Some(ty) = ty {
                self.values.entry(v.name.clone()).or_insert(ty);
            }
        }
    }

    pub fn report(&mut self, span: Option<Span>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            span,
            message: message.into(),
        });
    }

    pub fn bind(&mut self, name: &str, ty: Type) {
        self.scopes.push((name.to_string(), ty));
    }

    pub fn unbind(&mut self, n: usize) {
        let keep = self.scopes.len().saturating_sub(n);
        self.scopes.truncate(keep);
    }

    pub fn lookup(&self, name: &str) -> Option<Type> {
        self.scopes
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
            .or_else(|| {
                self.state_visible
                    .then(|| self.state.get(name).copied())
                    .flatten()
            })
            .or_else(|| self.values.get(name).copied())
    }

    /// Dispatches `node`; routing failures become diagnostics.
    pub fn check(&mut self, d: &TypeDispatcher, node: &Node) -> Option<Type> {
        match d.dispatch(node, self) {
            Ok(t) => t,
            Err(e) => {
                self.report(e.span(), e.to_string());
                None
            }
        }
    }

    fn expect(&mut self, d: &TypeDispatcher, node: &Node, want: Type, what: &str) {
        if let Some(got) = self.check(d, node) {
            if !want.accepts(got) {
                self.report(node.span(), format!("{what} must be {want}, found {got}"));
            }
        }
    }
}

fn binary_type(op: &str, l: Type, r: Type) -> Result<Type, String> {
    use Type::*;
    let numeric = l.is_numeric() && r.is_numeric();
    let mismatch = || format!("operator `{op}` cannot be applied to {l} and {r}");
    match op {
        "+" | "-" | "*" if numeric => Ok(if l == Int && r == Int { Int } else { Real }),
        "/" if numeric => Ok(Real),
        "div" | "mod" if l == Int && r == Int => Ok(Int),
        "<" | "<=" | ">" | ">=" if numeric => Ok(Bool),
        "=" | "<>" if numeric || (l == Bool && r == Bool) => Ok(Bool),
        "and" | "or" if l == Bool && r == Bool => Ok(Bool),
        _ => Err(mismatch()),
    }
}

/// The Base-L type checker as a dispatchable analysis.
pub fn base_type_checker() -> Analysis<TypeCtx, Option<Type>, Infallible> {
    Analysis::new(TREE_ID)
        .on("Exp", "IntLit", |_, _, _| Ok(Some(Type::Int)))
        .on("Exp", "RealLit", |_, _, _| Ok(Some(Type::Real)))
        .on("Exp", "BoolLit", |_, _, _| Ok(Some(Type::Bool)))
        .on("Exp", "Var", |n, ctx: &mut TypeCtx, _| {
            let name = n.text("name");
            let ty = ctx.lookup(name);
            if ty.is_none() {
                ctx.report(n.span(), format!("unbound name `{name}`"));
            }
            Ok(ty)
        })
        .on("Exp", "Unary", |n, ctx, d| -> TcResult {
            let op = n.text("op");
            let Some(t) = d.dispatch(n.child("operand"), ctx)? else {
                return Ok(None);
            };
            let ok = match op {
                "not" => t == Type::Bool,
                _ => t.is_numeric(),
            };
            if ok {
                Ok(Some(t))
            } else {
                ctx.report(n.span(), format!("operator `{op}` cannot be applied to {t}"));
                Ok(None)
            }
        })
        .on("Exp", "Binary", |n, ctx, d| -> TcResult {
            let l = d.dispatch(n.child("left"), ctx)?;
            let r = d.dispatch(n.child("right"), ctx)?;
            let (Some(l), Some(r)) = (l, r) else {
                return Ok(None);
            };
            match binary_type(n.text("op"), l, r) {
                Ok(t) => Ok(Some(t)),
                Err(msg) => {
                    ctx.report(n.span(), msg);
                    Ok(None)
                }
            }
        })
        .on("Exp", "If", |n, ctx, d| -> TcResult {
            let c = d.dispatch(n.child("cond"), ctx)?;
            let t = d.dispatch(n.child("then"), ctx)?;
            let e = d.dispatch(n.child("else"), ctx)?;
            if let Some(c) = c {
                if c != Type::Bool {
                    ctx.report(n.child("cond").span(), format!("condition must be bool, found {c}"));
                }
            }
            match (t, e) {
                (Some(t), Some(e)) if t == e => Ok(Some(t)),
                (Some(t), Some(e)) => {
                    ctx.report(n.span(), format!("if branches differ: {t} and {e}"));
                    Ok(None)
                }
                _ => Ok(None),
            }
        })
        .on("Exp", "Let", |n, ctx, d| -> TcResult {
            let Some(bound) = d.dispatch(n.child("bound"), ctx)? else {
                return Ok(None);
            };
            ctx.bind(n.text("name"), bound);
            let body = d.dispatch(n.child("body"), ctx);
            ctx.unbind(1);
            body
        })
        .on("Exp", "Apply", |n, ctx, d| -> TcResult {
            let name = n.text("name");
            let mut arg_types = Vec::new();
            for a in n.list("args") {
                arg_types.push(d.dispatch(a, ctx)?);
            }
            let Some((params, result)) = ctx.functions.get(name).cloned() else {
                ctx.report(n.span(), format!("unknown function `{name}`"));
                return Ok(None);
            };
            if params.len() != arg_types.len() {
                ctx.report(
                    n.span(),
                    format!(
                        "`{name}` expects {} argument(s), found {}",
                        params.len(),
                        arg_types.len()
                    ),
                );
                return Ok(Some(result));
            }
            for ((want, got), arg) in params.iter().zip(&arg_types).zip(n.list("args")) {
                if let Some(got) = got {
                    if !want.accepts(*got) {
                        ctx.report(
                            arg.span(),
                            format!("argument of `{name}` must be {want}, found {got}"),
                        );
                    }
                }
            }
            Ok(Some(result))
        })
        .on("Stmt", "Assign", |n, ctx, d| -> TcResult {
            let target = n.text("target");
            let value = d.dispatch(n.child("value"), ctx)?;
            match ctx.state.get(target).copied() {
                None => ctx.report(n.span(), format!("`{target}` is not a state variable")),
                Some(want) => {
                    if let Some(got) = value {
                        if !want.accepts(got) {
                            ctx.report(
                                n.span(),
                                format!("cannot assign {got} to `{target}` of type {want}"),
                            );
                        }
                    }
                }
            }
            Ok(None)
        })
        .on("Stmt", "If", |n, ctx, d| -> TcResult {
            if let Some(c) = d.dispatch(n.child("cond"), ctx)? {
                if c != Type::Bool {
                    ctx.report(n.child("cond").span(), format!("condition must be bool, found {c}"));
                }
            }
            d.dispatch(n.child("then"), ctx)?;
            d.dispatch(n.child("else"), ctx)?;
            Ok(None)
        })
        .on_category("Stmt", |n, ctx, d| -> TcResult {
            // Seq, Return, Skip: check children
            for c in n.children() {
                d.dispatch(c, ctx)?;
            }
            Ok(None)
        })
}

fn report_duplicates(module: &BaseModule, ctx: &mut TypeCtx) {
    let mut seen = HashSet::new();
    for def in &module.defs {
        let name = def.text("name");
        if !seen.insert(name.to_string()) {
            ctx.report(def.span(), format!("duplicate definition of `{name}`"));
        }
    }
}

fn bind_params(ctx: &mut TypeCtx, def: &Node, params: &[super::Param]) -> usize {
    let mut seen = HashSet::new();
    for p in params {
        if !seen.insert(p.name.as_str()) {
            ctx.report(def.span(), format!("duplicate parameter `{}`", p.name));
        }
        ctx.bind(&p.name, p.ty);
    }
    params.len()
}

/// Type-checks a module through `d`, which must route Base-L nodes to a
/// Base-L type checker.
pub fn type_check_with(module: &BaseModule, d: &TypeDispatcher) -> Vec<Diagnostic> {
    let mut ctx = TypeCtx::for_module(module);
    report_duplicates(module, &mut ctx);
    ctx.check_values(module, d);

    for s in &module.state {
        ctx.expect(d, &s.init, s.ty, &format!("initialiser of `{}`", s.name));
    }

    for f in &module.functions {
        let n = bind_params(&mut ctx, &f.node, &f.params);
        if let Some(pre) = &f.pre {
            ctx.expect(d, pre, Type::Bool, "precondition");
        }
        if let Some(body) = &f.body {
            ctx.expect(d, body, f.result, &format!("body of `{}`", f.name));
        }
        if let Some(post) = &f.post {
            ctx.bind(&f.result_name, f.result);
            ctx.expect(d, post, Type::Bool, "postcondition");
            ctx.unbind(1);
        }
        ctx.unbind(n);
    }

    ctx.state_visible = true;
    for op in &module.operations {
        let n = bind_params(&mut ctx, &op.node, &op.params);
        if let Some(pre) = &op.pre {
            ctx.expect(d, pre, Type::Bool, "precondition");
        }
        ctx.check(d, &op.body);
        if let Some(post) = &op.post {
            ctx.expect(d, post, Type::Bool, "postcondition");
        }
        ctx.unbind(n);
    }
    ctx.state_visible = false;

    for t in &module.traces {
        match parse_trace_expr(&t.text) {
            Err(e) => ctx.report(t.node.span(), format!("trace `{}`: {e}", t.name)),
            Ok(expr) => {
                for (op_name, args) in expr.calls() {
                    let Some(op) = module.operation(op_name) else {
                        ctx.report(
                            t.node.span(),
                            format!("trace `{}` calls unknown operation `{op_name}`", t.name),
                        );
                        continue;
                    };
                    if op.params.len() != args.len() {
                        ctx.report(
                            t.node.span(),
                            format!(
                                "trace `{}`: `{op_name}` expects {} argument(s), found {}",
                                t.name,
                                op.params.len(),
                                args.len()
                            ),
                        );
                        continue;
                    }
                    for (p, a) in op.params.iter().zip(args) {
                        if !p.ty.accepts(a.ty()) {
                            ctx.report(
                                t.node.span(),
                                format!(
                                    "trace `{}`: argument `{}` of `{op_name}` must be {}, found {}",
                                    t.name,
                                    p.name,
                                    p.ty,
                                    a.ty()
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    ctx.diagnostics
}

pub(crate) fn base_dispatcher() -> TypeDispatcher {
    Dispatcher::new()
        .register(TREE_ID, base_type_checker())
        .expect("fresh dispatcher")
}

/// Type-checks a Base-L module. An empty result means the module is well typed.
pub fn type_check(module: &BaseModule) -> Vec<Diagnostic> {
    type_check_with(module, &base_dispatcher())
}

/// Types a standalone expression against `module`'s values and functions.
pub fn type_check_exp(module: &BaseModule, exp: &Node) -> (Option<Type>, Vec<Diagnostic>) {
    type_check_exp_in(module, exp, &[])
}

/// Like [`type_check_exp`] with extra typed names in scope.
pub fn type_check_exp_in(
    module: &BaseModule,
    exp: &Node,
    bindings: &[(&str, Type)],
) -> (Option<Type>, Vec<Diagnostic>) {
    let d = base_dispatcher();
    let mut ctx = TypeCtx::for_module(module);
    ctx.check_values(module, &d);
    ctx.diagnostics.clear();
    for (name, ty) in bindings {
        ctx.bind(name, *ty);
    }
    let ty = ctx.check(&d, exp);
    (ty, ctx.diagnostics)
}
