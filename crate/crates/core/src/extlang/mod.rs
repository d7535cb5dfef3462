//! Proc-L: CSP-flavoured processes over Base-L.
//!
//! Process trees are hybrid: guards hold Base-L expression nodes. The Proc-L
//! analyses handle only `Proc` alternatives and reach every embedded
//! expression through the dispatcher, which hands it to the Base-L analysis.

use std::collections::BTreeSet;
use std::convert::Infallible;
use std::sync::OnceLock;

use thiserror::Error;

use crate::astspec::Schema;
use crate::baselang::parser::{parse_document, PResult, Parser};
use crate::baselang::{
    self, base_po_generator, base_type_checker, gen_pos_with, type_check_with, BaseModule,
    EvalError, EvalOptions, Interpreter, Obligation, PoCtx, PoDispatcher, SyntaxError, Type,
    TypeCtx, TypeDispatcher,
};
use crate::span::Span;
use crate::treekit::{make_node, Analysis, DispatchError, Diagnostic, Dispatcher, FieldValue, Node};

/// Tree id of the Proc-L extension schema.
pub const TREE_ID: &str = "ProcL";

/// The bundled Proc-L extension specification.
pub const SPEC: &str = include_str!("../../specs/procl.ast");

/// The merged Base-L + Proc-L schema.
pub fn schema() -> &'static Schema {
    static SCHEMA: OnceLock<Schema> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        Schema::compile_extension(baselang::schema(), SPEC).expect("bundled Proc-L spec compiles")
    })
}

#[derive(Debug, Clone)]
pub struct ProcessDef {
    pub name: String,
    pub span: Span,
    pub body: Node,
}

#[derive(Debug, Clone)]
pub struct ProcModule {
    pub base: BaseModule,
    pub processes: Vec<ProcessDef>,
}

impl ProcModule {
    pub fn process(&self, name: &str) -> Option<&ProcessDef> {
        self.processes.iter().find(|p| p.name == name)
    }
}

fn proc_node(alt: &str, fields: Vec<(&str, FieldValue)>, span: Span) -> Node {
    make_node(schema(), "Proc", alt, fields)
        .expect("parser builds well-formed Proc-L nodes")
        .with_span(span)
}

fn choice(p: &mut Parser<'_>) -> PResult<Node> {
    let mut left = sequence(p)?;
    while p.eat_sym("[]") {
        let right = sequence(p)?;
        let span = left.span().unwrap_or_default().to(right.span().unwrap_or_default());
        left = proc_node("ExtChoice", vec![("left", left.into()), ("right", right.into())], span);
    }
    Ok(left)
}

fn sequence(p: &mut Parser<'_>) -> PResult<Node> {
    let mut first = prefix(p)?;
    while p.eat_sym(";") {
        let second = prefix(p)?;
        let span = first.span().unwrap_or_default().to(second.span().unwrap_or_default());
        first = proc_node("Seq", vec![("first", first.into()), ("second", second.into())], span);
    }
    Ok(first)
}

fn prefix(p: &mut Parser<'_>) -> PResult<Node> {
    let start = p.span();
    if p.eat_kw("Stop") {
        return Ok(proc_node("Stop", vec![], start));
    }
    if p.eat_kw("Skip") {
        return Ok(proc_node("Skip", vec![], start));
    }
    if p.eat_sym("(") {
        let inner = choice(p)?;
        p.expect_sym(")")?;
        return Ok(inner);
    }
    if p.eat_sym("[") {
        // The base parser builds the condition, so it is a Base-L subtree.
        let cond = p.exp()?;
        p.expect_sym("]")?;
        p.expect_sym("&")?;
        let body = prefix(p)?;
        let span = start.to(body.span().unwrap_or(start));
        return Ok(proc_node("Guard", vec![("cond", cond.into()), ("body", body.into())], span));
    }
    let (event, _) = p.ident()?;
    p.expect_sym("->")?;
    let cont = prefix(p)?;
    let span = start.to(cont.span().unwrap_or(start));
    Ok(proc_node(
        "Prefix",
        vec![("event", FieldValue::ident(event)), ("cont", cont.into())],
        span,
    ))
}

fn process_entries(p: &mut Parser<'_>, out: &mut Vec<ProcessDef>) -> PResult<()> {
    loop {
        if p.at_eof() {
            return Ok(());
        }
        if !p.eat_kw("process") && p.at_section_start() {
            return Ok(());
        }
        let (name, span) = p.ident()?;
        p.expect_sym("=")?;
        let body = choice(p)?;
        out.push(ProcessDef { name, span, body });
    }
}

/// Parses a Base-L document extended with a `processes` section. A bare
/// `process P = ...` entry is accepted at section level too.
pub fn parse_procl(text: &str) -> Result<ProcModule, SyntaxError> {
    let mut processes = Vec::new();
    let base = parse_document(text, &["processes", "process"], |keyword, p| {
        if keyword == "processes" {
            p.bump();
        }
        process_entries(p, &mut processes)
    })?;
    Ok(ProcModule { base, processes })
}

/// True when `text` has a `processes` section or a `process` entry.
pub fn looks_like_procl(text: &str) -> bool {
    text.lines().any(|l| {
        let first = l.split_whitespace().next();
        first == Some("processes") || first == Some("process")
    })
}

// ----- type checking ---------------------------------------------------------

type TcResult = Result<Option<Type>, DispatchError<Infallible>>;

/// The Proc-L type checker: exact-pair handlers for `Proc` alternatives only.
pub fn proc_type_checker() -> Analysis<TypeCtx, Option<Type>, Infallible> {
    Analysis::new(TREE_ID)
        .on("Proc", "Stop", |_, _, _| Ok(None))
        .on("Proc", "Skip", |_, _, _| Ok(None))
        .on("Proc", "Prefix", |n, ctx, d| -> TcResult {
            d.dispatch(n.child("cont"), ctx)?;
            Ok(None)
        })
        .on("Proc", "ExtChoice", |n, ctx, d| -> TcResult {
            d.dispatch(n.child("left"), ctx)?;
            d.dispatch(n.child("right"), ctx)?;
            Ok(None)
        })
        .on("Proc", "Seq", |n, ctx, d| -> TcResult {
            d.dispatch(n.child("first"), ctx)?;
            d.dispatch(n.child("second"), ctx)?;
            Ok(None)
        })
        .on("Proc", "Guard", |n, ctx: &mut TypeCtx, d| -> TcResult {
            let cond = n.child("cond");
            let ty = ctx.check(d, cond);
            ctx.observed.push((cond.clone(), ty));
            if let Some(t) = ty {
                if t != Type::Bool {
                    ctx.report(cond.span(), format!("guard must be bool, found {t}"));
                }
            }
            d.dispatch(n.child("body"), ctx)?;
            Ok(None)
        })
}

/// Dispatcher with the Base-L and Proc-L type checkers registered.
pub fn ext_type_dispatcher() -> TypeDispatcher {
    Dispatcher::new()
        .register(baselang::TREE_ID, base_type_checker())
        .and_then(|d| d.register(TREE_ID, proc_type_checker()))
        .expect("fresh dispatcher")
}

/// Type checking results plus the guard types seen along the way.
#[derive(Debug, Default)]
pub struct ExtCheck {
    pub diagnostics: Vec<Diagnostic>,
    /// Each guard condition with the type the dispatcher computed for it.
    pub guard_types: Vec<(Node, Option<Type>)>,
}

pub fn type_check_ext_with(module: &ProcModule, d: &TypeDispatcher) -> ExtCheck {
    let mut diagnostics = type_check_with(&module.base, d);
    let mut ctx = TypeCtx::for_module(&module.base);
    ctx.check_values(&module.base, d);
    ctx.diagnostics.clear();
    let mut seen = BTreeSet::new();
    for p in &module.processes {
        if !seen.insert(p.name.as_str()) {
            ctx.report(Some(p.span), format!("duplicate process `{}`", p.name));
        }
        ctx.check(d, &p.body);
    }
    diagnostics.append(&mut ctx.diagnostics);
    ExtCheck {
        diagnostics,
        guard_types: ctx.observed,
    }
}

/// Type-checks the base module and every process.
pub fn type_check_ext(module: &ProcModule) -> Vec<Diagnostic> {
    type_check_ext_with(module, &ext_type_dispatcher()).diagnostics
}

// ----- proof obligations -----------------------------------------------------

fn po_children(n: &Node, ctx: &mut PoCtx, d: &PoDispatcher) -> Result<(), DispatchError<Infallible>> {
    for c in n.children() {
        d.dispatch(c, ctx)?;
    }
    Ok(())
}

/// The Proc-L obligation generator. It adds no obligation kinds of its own;
/// guard expressions are routed to the base generator.
pub fn proc_po_generator() -> Analysis<PoCtx, (), Infallible> {
    Analysis::new(TREE_ID)
        .on("Proc", "Stop", |_, _, _| Ok(()))
        .on("Proc", "Skip", |_, _, _| Ok(()))
        .on("Proc", "Prefix", po_children)
        .on("Proc", "ExtChoice", po_children)
        .on("Proc", "Seq", po_children)
        .on("Proc", "Guard", po_children)
}

pub fn ext_po_dispatcher() -> PoDispatcher {
    Dispatcher::new()
        .register(baselang::TREE_ID, base_po_generator())
        .and_then(|d| d.register(TREE_ID, proc_po_generator()))
        .expect("fresh dispatcher")
}

pub fn gen_pos_ext_with(module: &ProcModule, d: &PoDispatcher) -> Vec<Obligation> {
    let mut out = gen_pos_with(&module.base, d);
    for p in &module.processes {
        let mut ctx = PoCtx::new(p.name.clone());
        let _ = d.dispatch(&p.body, &mut ctx);
        out.append(&mut ctx.obligations);
    }
    out
}

/// Obligations of the base module followed by those of each process.
pub fn gen_pos_ext(module: &ProcModule) -> Vec<Obligation> {
    gen_pos_ext_with(module, &ext_po_dispatcher())
}

// ----- traces ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("process `{process}`: guard evaluation failed: {error}")]
    Guard { process: String, error: EvalError },
    #[error("process `{process}`: guard at {span} is not boolean")]
    NonBoolGuard { process: String, span: Span },
}

pub type Trace = Vec<String>;

/// Renders a trace as `<a,b>`.
pub fn format_trace(t: &Trace) -> String {
    format!("<{}>", t.join(","))
}

struct Stepper<'a> {
    interp: Interpreter,
    process: &'a str,
}

/// Pending work: the head process followed by sequential continuations.
type Config = Vec<Node>;

impl Stepper<'_> {
    /// Initial events of `node` with residual configurations, and whether it
    /// can terminate.
    fn steps(&self, node: &Node) -> Result<(Vec<(String, Config)>, bool), TraceError> {
        Ok(match node.alternative() {
            "Stop" => (vec![], false),
            "Skip" => (vec![], true),
            "Prefix" => (vec![(node.text("event").to_string(), vec![node.child("cont").clone()])], false),
            "ExtChoice" => {
                let (mut l, lt) = self.steps(node.child("left"))?;
                let (r, rt) = self.steps(node.child("right"))?;
                l.extend(r);
                (l, lt || rt)
            }
            "Seq" => {
                let second = node.child("second");
                let (mut first, ft) = self.steps(node.child("first"))?;
                for (_, rest) in &mut first {
                    rest.push(second.clone());
                }
                if ft {
                    let (s, st) = self.steps(second)?;
                    first.extend(s);
                    (first, st)
                } else {
                    (first, false)
                }
            }
            "Guard" => {
                let cond = node.child("cond");
                let v = self.interp.eval(cond).map_err(|error| TraceError::Guard {
                    process: self.process.to_string(),
                    error,
                })?;
                match v.as_bool() {
                    Some(true) => self.steps(node.child("body"))?,
                    Some(false) => (vec![], false),
                    None => {
                        return Err(TraceError::NonBoolGuard {
                            process: self.process.to_string(),
                            span: cond.span().unwrap_or_default(),
                        })
                    }
                }
            }
            other => unreachable!("not a Proc alternative: {other}"),
        })
    }

    fn config_steps(&self, config: &[Node]) -> Result<Vec<(String, Config)>, TraceError> {
        let Some((head, rest)) = config.split_first() else {
            return Ok(vec![]);
        };
        let (mut steps, terminates) = self.steps(head)?;
        for (_, residual) in &mut steps {
            residual.extend(rest.iter().cloned());
        }
        if terminates {
            steps.extend(self.config_steps(rest)?);
        }
        Ok(steps)
    }
}

/// All event sequences of length at most `depth` that process `name` can
/// perform, in lexicographic order.
pub fn enumerate_traces(module: &ProcModule, name: &str, depth: usize) -> Result<BTreeSet<Trace>, TraceError> {
    let process = module
        .process(name)
        .ok_or_else(|| TraceError::UnknownProcess(name.to_string()))?;
    let interp = Interpreter::new(&module.base, EvalOptions::default()).map_err(|error| TraceError::Guard {
        process: name.to_string(),
        error,
    })?;
    let stepper = Stepper { interp, process: name };
    let mut traces = BTreeSet::from([Vec::new()]);
    let mut frontier: Vec<(Trace, Config)> = vec![(Vec::new(), vec![process.body.clone()])];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (trace, config) in &frontier {
            for (event, residual) in stepper.config_steps(config)? {
                let mut t = trace.clone();
                t.push(event);
                traces.insert(t.clone());
                next.push((t, residual));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(traces)
}
