//! Proof-obligation generation.

use std::convert::Infallible;
use std::fmt;

use super::render::{at_least, render_exp};
use super::{BaseModule, Type, TREE_ID};
use crate::span::Span;
use crate::treekit::{Analysis, DispatchError, Dispatcher, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObligationKind {
    DivByZero,
    ImplicitSatisfiability,
}

impl fmt::Display for ObligationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObligationKind::DivByZero => "DivByZero",
            ObligationKind::ImplicitSatisfiability => "ImplicitSatisfiability",
        })
    }
}

/// A predicate whose truth rules out a runtime fault or establishes that an
/// implicit definition is satisfiable.
#[derive(Debug, Clone, PartialEq)]
pub struct Obligation {
    pub kind: ObligationKind,
    pub span: Option<Span>,
    /// Name of the enclosing definition or process.
    pub context: String,
    /// Full predicate, e.g. `x <> 0` or `exists r : r * r <= x`.
    pub predicate_text: String,
    /// The quantifier-free part of the predicate; always a Base-L expression.
    /// Equal to `predicate_text` for division obligations.
    pub body_text: String,
    /// Typed names free in `body_text` besides module values and functions.
    pub scope: Vec<(String, Type)>,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = self.span {
            write!(f, "{span}: ")?;
        }
        write!(f, "{} in {}: {}", self.kind, self.context, self.predicate_text)
    }
}

/// Accumulator for obligation generators.
#[derive(Debug, Default)]
pub struct PoCtx {
    pub obligations: Vec<Obligation>,
    context: String,
    scope: Vec<(String, Type)>,
    lets: Vec<(String, Node)>,
    state: Vec<(String, Type)>,
}

impl PoCtx {
    pub fn new(context: impl Into<String>) -> Self {
        PoCtx {
            context: context.into(),
            ..Default::default()
        }
    }

    pub fn set_context(&mut self, context: impl Into<String>) {
        self.context = context.into();
    }

    fn push(&mut self, kind: ObligationKind, span: Option<Span>, predicate_text: String, body_text: String) {
        self.obligations.push(Obligation {
            kind,
            span,
            context: self.context.clone(),
            predicate_text,
            body_text,
            scope: self.scope.clone(),
        });
    }
}

pub type PoDispatcher = Dispatcher<PoCtx, (), Infallible>;
type PoResult = Result<(), DispatchError<Infallible>>;

fn visit_children(n: &Node, ctx: &mut PoCtx, d: &PoDispatcher) -> PoResult {
    for c in n.children() {
        d.dispatch(c, ctx)?;
    }
    Ok(())
}

fn visit_opt(n: Option<&Node>, ctx: &mut PoCtx, d: &PoDispatcher) -> PoResult {
    match n {
        Some(n) => d.dispatch(n, ctx),
        None => Ok(()),
    }
}

fn param_types(def: &Node) -> Vec<(String, Type)> {
    def.list("params")
        .iter()
        .filter_map(|p| Some((p.text("name").to_string(), Type::from_name(p.text("type"))?)))
        .collect()
}

fn nonzero_literal(n: &Node) -> bool {
    match n.alternative() {
        "IntLit" => n.int("value") != 0,
        "RealLit" => n.real("value") != 0.0,
        _ => false,
    }
}

/// Enters a definition: sets the context name and the typed scope.
fn enter(def: &Node, ctx: &mut PoCtx, scope: Vec<(String, Type)>) {
    ctx.context = def.text("name").to_string();
    ctx.scope = scope;
}

/// The Base-L obligation generator as a dispatchable analysis.
pub fn base_po_generator() -> Analysis<PoCtx, (), Infallible> {
    Analysis::new(TREE_ID)
        .on("Exp", "Binary", |n, ctx: &mut PoCtx, d| {
            let divisor = n.child("right");
            if matches!(n.text("op"), "/" | "div" | "mod") && !nonzero_literal(divisor) {
                let mut text = format!("{} <> 0", at_least(divisor, 5));
                for (name, bound) in ctx.lets.iter().rev() {
                    text = format!("let {name} = {} in {text}", render_exp(bound));
                }
                ctx.push(ObligationKind::DivByZero, n.span(), text.clone(), text);
            }
            visit_children(n, ctx, d)
        })
        .on("Exp", "Let", |n, ctx, d| {
            d.dispatch(n.child("bound"), ctx)?;
            ctx.lets.push((n.text("name").to_string(), n.child("bound").clone()));
            let r = d.dispatch(n.child("body"), ctx);
            ctx.lets.pop();
            r
        })
        .on("Def", "ExplicitFn", |n, ctx, d| {
            enter(n, ctx, param_types(n));
            visit_opt(n.opt_child("pre"), ctx, d)?;
            visit_opt(n.opt_child("body"), ctx, d)?;
            if let Some(ty) = Type::from_name(n.text("result")) {
                ctx.scope.push(("RESULT".to_string(), ty));
            }
            visit_opt(n.opt_child("post"), ctx, d)
        })
        .on("Def", "ImplicitFn", |n, ctx, d| {
            enter(n, ctx, param_types(n));
            visit_opt(n.opt_child("pre"), ctx, d)?;
            let binder = n.text("resultName");
            if let Some(ty) = Type::from_name(n.text("result")) {
                ctx.scope.push((binder.to_string(), ty));
            }
            let body = render_exp(n.child("post"));
            ctx.push(
                ObligationKind::ImplicitSatisfiability,
                n.span(),
                format!("exists {binder} : {body}"),
                body,
            );
            d.dispatch(n.child("post"), ctx)
        })
        .on("Def", "OpDef", |n, ctx, d| {
            let mut scope = ctx.state.clone();
            scope.extend(param_types(n));
            enter(n, ctx, scope);
            visit_children(n, ctx, d)
        })
        .on("Def", "Param", |_, _, _| Ok(()))
        .on("Def", "TraceDef", |_, _, _| Ok(()))
        .on_category("Def", |n, ctx, d| {
            enter(n, ctx, Vec::new());
            visit_children(n, ctx, d)
        })
        .otherwise(visit_children)
}

pub(crate) fn base_dispatcher() -> PoDispatcher {
    Dispatcher::new()
        .register(TREE_ID, base_po_generator())
        .expect("fresh dispatcher")
}

/// Runs `d` over every definition of `module`.
pub fn gen_pos_with(module: &BaseModule, d: &PoDispatcher) -> Vec<Obligation> {
    let mut ctx = PoCtx::new(module.name.clone());
    ctx.state = module.state.iter().map(|s| (s.name.clone(), s.ty)).collect();
    for def in &module.defs {
        // Routing cannot fail for a parsed module and handlers are infallible.
        let _ = d.dispatch(def, &mut ctx);
    }
    ctx.obligations
}

/// Proof obligations of a Base-L module, in source order.
pub fn gen_pos(module: &BaseModule) -> Vec<Obligation> {
    gen_pos_with(module, &base_dispatcher())
}

/// Proof obligations of a standalone expression.
pub fn gen_pos_exp(exp: &Node) -> Vec<Obligation> {
    let mut ctx = PoCtx::new("<exp>");
    let _ = base_dispatcher().dispatch(exp, &mut ctx);
    ctx.obligations
}
