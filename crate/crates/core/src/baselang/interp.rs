//! Base-L interpreter, including constraint-based evaluation of implicit
//! functions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use super::value::{apply_binary, apply_unary};
use super::{parse_exp, BaseModule, FunctionDef, OperationDef, Type, Value, TREE_ID};
use crate::span::Span;
use crate::treekit::{Analysis, DispatchError, Dispatcher, Node};

/// Default search interval for implicit functions.
pub const DEFAULT_BOUNDS: (i64, i64) = (-1000, 1000);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// Implicit functions raise [`RuntimeError::ImplicitEvaluation`].
    #[default]
    Strict,
    /// Implicit functions are solved by bounded search over the result.
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub bounds: (i64, i64),
    pub max_depth: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: EvalMode::Strict,
            bounds: DEFAULT_BOUNDS,
            max_depth: 200,
        }
    }
}

impl EvalOptions {
    pub fn solve(bounds: (i64, i64)) -> Self {
        EvalOptions {
            mode: EvalMode::Solve,
            bounds,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("ImplicitEvaluationError: `{function}` is implicitly defined and cannot be executed")]
    ImplicitEvaluation { function: String },
    #[error("PreconditionFailure: precondition of `{name}` does not hold")]
    PreconditionFailure { name: String },
    #[error("PostconditionFailure: postcondition of `{name}` does not hold")]
    PostconditionFailure { name: String },
    #[error("DivisionByZero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("`{name}` expects {expected} argument(s), found {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("NoSolutionInBounds: no result of `{function}` in [{lo}, {hi}] satisfies its postcondition")]
    NoSolutionInBounds { function: String, lo: i64, hi: i64 },
    #[error("implicit function `{function}` has result type {ty}; only int results can be solved")]
    UnsupportedImplicit { function: String, ty: Type },
    #[error("recursion deeper than {0} calls")]
    RecursionLimit(usize),
    #[error("`{0}` is not a state variable")]
    NotAssignable(String),
    #[error("{0}")]
    Dispatch(String),
}

/// A runtime error with the span of the innermost node that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct EvalError {
    pub error: RuntimeError,
    pub span: Option<Span>,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(span) => write!(f, "{span}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl From<RuntimeError> for EvalError {
    fn from(error: RuntimeError) -> Self {
        EvalError { error, span: None }
    }
}

impl From<DispatchError<RuntimeError>> for EvalError {
    fn from(e: DispatchError<RuntimeError>) -> Self {
        let span = e.span();
        match e {
            DispatchError::Handler { error, .. } => EvalError { error, span },
            other => EvalError {
                error: RuntimeError::Dispatch(other.to_string()),
                span,
            },
        }
    }
}

/// Result of dispatching an expression or statement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    Value(Value),
    Normal,
    Return(Value),
}

/// Operation state: state variable name to value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct State(BTreeMap<String, Value>);

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: Value) {
        self.0.insert(name.to_string(), value);
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.set(name, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// A read or write of a state variable during operation execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Access {
    pub var: String,
    pub kind: AccessKind,
    pub value: Value,
}

struct ModuleEnv {
    functions: HashMap<String, FunctionDef>,
    operations: HashMap<String, OperationDef>,
    state_types: HashMap<String, Type>,
    options: EvalOptions,
}

/// Per-run interpreter context.
pub struct EvalCtx {
    env: Rc<ModuleEnv>,
    values: Rc<HashMap<String, Value>>,
    scopes: Vec<(String, Value)>,
    state: Option<State>,
    accesses: Option<Vec<Access>>,
    depth: usize,
}

impl EvalCtx {
    fn lookup(&mut self, name: &str) -> Option<Value> {
        if let Some((_, v)) = self.scopes.iter().rev().find(|(n, _)| n == name) {
            return Some(*v);
        }
        if let Some(v) = self.state.as_ref().and_then(|s| s.get(name)) {
            if let Some(log) = &mut self.accesses {
                log.push(Access {
                    var: name.to_string(),
                    kind: AccessKind::Read,
                    value: v,
                });
            }
            return Some(v);
        }
        self.values.get(name).copied()
    }
}

type EResult<T> = Result<T, DispatchError<RuntimeError>>;
pub type EvalDispatcher = Dispatcher<EvalCtx, Flow, RuntimeError>;

fn fail<T>(e: RuntimeError) -> EResult<T> {
    Err(DispatchError::handler(e))
}

fn value_of(d: &EvalDispatcher, node: &Node, ctx: &mut EvalCtx) -> EResult<Value> {
    match d.dispatch(node, ctx)? {
        Flow::Value(v) => Ok(v),
        _ => fail(RuntimeError::TypeMismatch(format!(
            "{} does not produce a value",
            node.alternative()
        ))),
    }
}

fn bool_of(d: &EvalDispatcher, node: &Node, ctx: &mut EvalCtx) -> EResult<bool> {
    let v = value_of(d, node, ctx)?;
    v.as_bool()
        .ok_or_else(|| DispatchError::handler(RuntimeError::TypeMismatch(format!("expected bool, found {}", v.ty()))))
}

fn bind_args(
    name: &str,
    params: &[super::Param],
    args: &[Value],
) -> Result<Vec<(String, Value)>, RuntimeError> {
    if params.len() != args.len() {
        return Err(RuntimeError::ArityMismatch {
            name: name.to_string(),
            expected: params.len(),
            found: args.len(),
        });
    }
    params
        .iter()
        .zip(args)
        .map(|(p, a)| {
            if p.ty.accepts(a.ty()) {
                Ok((p.name.clone(), a.coerce_to(p.ty)))
            } else {
                Err(RuntimeError::TypeMismatch(format!(
                    "argument `{}` of `{name}` must be {}, found {}",
                    p.name,
                    p.ty,
                    a.ty()
                )))
            }
        })
        .collect()
}

/// Searches `[lo, hi]` smallest-first for a result satisfying `f`'s
/// postcondition. Parameters must already be bound in `ctx`. A candidate whose
/// postcondition fails to evaluate counts as unsatisfying.
fn solve_bound(f: &FunctionDef, (lo, hi): (i64, i64), ctx: &mut EvalCtx, d: &EvalDispatcher) -> EResult<Value> {
    if f.result != Type::Int {
        return fail(RuntimeError::UnsupportedImplicit {
            function: f.name.clone(),
            ty: f.result,
        });
    }
    let post = f.post.as_ref().expect("implicit functions have a postcondition");
    let mark = ctx.scopes.len();
    for r in lo..=hi {
        ctx.scopes.push((f.result_name.clone(), Value::Int(r)));
        let ok = bool_of(d, post, ctx);
        ctx.scopes.truncate(mark);
        if let Ok(true) = ok {
            return Ok(Value::Int(r));
        }
    }
    fail(RuntimeError::NoSolutionInBounds {
        function: f.name.clone(),
        lo,
        hi,
    })
}

fn call_function(f: &FunctionDef, args: &[Value], ctx: &mut EvalCtx, d: &EvalDispatcher) -> EResult<Value> {
    let bindings = bind_args(&f.name, &f.params, args).map_err(DispatchError::handler)?;
    if ctx.depth >= ctx.env.options.max_depth {
        return fail(RuntimeError::RecursionLimit(ctx.env.options.max_depth));
    }
    ctx.depth += 1;
    let saved_scopes = std::mem::replace(&mut ctx.scopes, bindings);
    let saved_state = ctx.state.take();

    let result = (|| {
        if let Some(pre) = &f.pre {
            if !bool_of(d, pre, ctx)? {
                return fail(RuntimeError::PreconditionFailure { name: f.name.clone() });
            }
        }
        match &f.body {
            Some(body) => {
                let v = value_of(d, body, ctx)?.coerce_to(f.result);
                if let Some(post) = &f.post {
                    ctx.scopes.push((f.result_name.clone(), v));
                    let ok = bool_of(d, post, ctx)?;
                    ctx.scopes.pop();
                    if !ok {
                        return fail(RuntimeError::PostconditionFailure { name: f.name.clone() });
                    }
                }
                Ok(v)
            }
            None => match ctx.env.options.mode {
                EvalMode::Strict => fail(RuntimeError::ImplicitEvaluation {
                    function: f.name.clone(),
                }),
                EvalMode::Solve => solve_bound(f, ctx.env.options.bounds, ctx, d),
            },
        }
    })();

    ctx.scopes = saved_scopes;
    ctx.state = saved_state;
    ctx.depth -= 1;
    result
}

/// The Base-L interpreter as a dispatchable analysis.
pub fn base_interpreter() -> Analysis<EvalCtx, Flow, RuntimeError> {
    Analysis::new(TREE_ID)
        .on("Exp", "IntLit", |n, _, _| Ok(Flow::Value(Value::Int(n.int("value")))))
        .on("Exp", "RealLit", |n, _, _| Ok(Flow::Value(Value::Real(n.real("value")))))
        .on("Exp", "BoolLit", |n, _, _| Ok(Flow::Value(Value::Bool(n.bool("value")))))
        .on("Exp", "Var", |n, ctx: &mut EvalCtx, _| {
            let name = n.text("name");
            match ctx.lookup(name) {
                Some(v) => Ok(Flow::Value(v)),
                None => fail(RuntimeError::UnboundName(name.to_string())),
            }
        })
        .on("Exp", "Unary", |n, ctx, d| {
            let v = value_of(d, n.child("operand"), ctx)?;
            apply_unary(n.text("op"), v)
                .map(Flow::Value)
                .map_err(DispatchError::handler)
        })
        .on("Exp", "Binary", |n, ctx, d| {
            let op = n.text("op");
            if op == "and" || op == "or" {
                let l = bool_of(d, n.child("left"), ctx)?;
                if (op == "and") != l {
                    return Ok(Flow::Value(Value::Bool(l)));
                }
                return Ok(Flow::Value(Value::Bool(bool_of(d, n.child("right"), ctx)?)));
            }
            let l = value_of(d, n.child("left"), ctx)?;
            let r = value_of(d, n.child("right"), ctx)?;
            apply_binary(op, l, r)
                .map(Flow::Value)
                .map_err(DispatchError::handler)
        })
        .on("Exp", "If", |n, ctx, d| {
            if bool_of(d, n.child("cond"), ctx)? {
                d.dispatch(n.child("then"), ctx)
            } else {
                d.dispatch(n.child("else"), ctx)
            }
        })
        .on("Exp", "Let", |n, ctx, d| {
            let v = value_of(d, n.child("bound"), ctx)?;
            ctx.scopes.push((n.text("name").to_string(), v));
            let body = d.dispatch(n.child("body"), ctx);
            ctx.scopes.pop();
            body
        })
        .on("Exp", "Apply", |n, ctx, d| {
            let name = n.text("name");
            let mut args = Vec::with_capacity(n.list("args").len());
            for a in n.list("args") {
                args.push(value_of(d, a, ctx)?);
            }
            let env = Rc::clone(&ctx.env);
            let f = env
                .functions
                .get(name)
                .ok_or_else(|| DispatchError::handler(RuntimeError::UnknownFunction(name.to_string())))?;
            call_function(f, &args, ctx, d).map(Flow::Value)
        })
        .on("Stmt", "Assign", |n, ctx, d| {
            let target = n.text("target");
            let v = value_of(d, n.child("value"), ctx)?;
            let ty = ctx.env.state_types.get(target).copied();
            let (Some(ty), Some(state)) = (ty, ctx.state.as_mut()) else {
                return fail(RuntimeError::NotAssignable(target.to_string()));
            };
            if !ty.accepts(v.ty()) {
                return fail(RuntimeError::TypeMismatch(format!(
                    "cannot assign {} to `{target}` of type {ty}",
                    v.ty()
                )));
            }
            let v = v.coerce_to(ty);
            state.set(target, v);
            if let Some(log) = &mut ctx.accesses {
                log.push(Access {
                    var: target.to_string(),
                    kind: AccessKind::Write,
                    value: v,
                });
            }
            Ok(Flow::Normal)
        })
        .on("Stmt", "Seq", |n, ctx, d| match d.dispatch(n.child("first"), ctx)? {
            ret @ Flow::Return(_) => Ok(ret),
            _ => d.dispatch(n.child("second"), ctx),
        })
        .on("Stmt", "If", |n, ctx, d| {
            if bool_of(d, n.child("cond"), ctx)? {
                d.dispatch(n.child("then"), ctx)
            } else {
                d.dispatch(n.child("else"), ctx)
            }
        })
        .on("Stmt", "Return", |n, ctx, d| {
            Ok(Flow::Return(value_of(d, n.child("value"), ctx)?))
        })
        .on("Stmt", "Skip", |_, _, _| Ok(Flow::Normal))
}

/// An interpreter bound to one module: evaluated `values`, function and
/// operation tables, and a dispatcher with the Base-L interpreter registered.
pub struct Interpreter {
    env: Rc<ModuleEnv>,
    values: Rc<HashMap<String, Value>>,
    dispatcher: EvalDispatcher,
}

impl Interpreter {
    /// Prepares `module` for evaluation; its `values` are evaluated in order.
    pub fn new(module: &BaseModule, options: EvalOptions) -> Result<Interpreter, EvalError> {
        let mut functions = HashMap::new();
        for f in &module.functions {
            functions.entry(f.name.clone()).or_insert_with(|| f.clone());
        }
        let mut operations = HashMap::new();
        for o in &module.operations {
            operations.entry(o.name.clone()).or_insert_with(|| o.clone());
        }
        let state_types = module.state.iter().map(|s| (s.name.clone(), s.ty)).collect();
        let env = Rc::new(ModuleEnv {
            functions,
            operations,
            state_types,
            options,
        });
        let mut interp = Interpreter {
            env,
            values: Rc::new(HashMap::new()),
            dispatcher: Dispatcher::new()
                .register(TREE_ID, base_interpreter())
                .expect("fresh dispatcher"),
        };
        let mut values = HashMap::new();
        for v in &module.values {
            let value = interp.eval(&v.exp)?;
            values.entry(v.name.clone()).or_insert(value);
            interp.values = Rc::new(values.clone());
        }
        Ok(interp)
    }

    pub fn options(&self) -> EvalOptions {
        self.env.options
    }

    pub fn dispatcher(&self) -> &EvalDispatcher {
        &self.dispatcher
    }

    pub fn value(&self, name: &str) -> Option<Value> {
        self.values.get(name).copied()
    }

    fn ctx(&self, scopes: Vec<(String, Value)>, state: Option<State>, log: bool) -> EvalCtx {
        EvalCtx {
            env: Rc::clone(&self.env),
            values: Rc::clone(&self.values),
            scopes,
            state,
            accesses: log.then(Vec::new),
            depth: 0,
        }
    }

    /// Evaluates a closed expression (module values and functions in scope).
    pub fn eval(&self, exp: &Node) -> Result<Value, EvalError> {
        self.eval_with(exp, &[])
    }

    /// Evaluates `exp` with extra local bindings.
    pub fn eval_with(&self, exp: &Node, bindings: &[(&str, Value)]) -> Result<Value, EvalError> {
        let scopes = bindings.iter().map(|(n, v)| (n.to_string(), *v)).collect();
        let mut ctx = self.ctx(scopes, None, false);
        Ok(value_of(&self.dispatcher, exp, &mut ctx)?)
    }

    /// Evaluates `exp` with `state` visible, e.g. plant derivatives.
    pub fn eval_in_state(&self, exp: &Node, state: &State) -> Result<Value, EvalError> {
        let mut ctx = self.ctx(Vec::new(), Some(state.clone()), false);
        Ok(value_of(&self.dispatcher, exp, &mut ctx)?)
    }

    pub fn call(&self, name: &str, args: &[Value]) -> Result<Value, EvalError> {
        let f = self
            .env
            .functions
            .get(name)
            .ok_or_else(|| RuntimeError::UnknownFunction(name.to_string()))?;
        let mut ctx = self.ctx(Vec::new(), None, false);
        Ok(call_function(f, args, &mut ctx, &self.dispatcher)?)
    }

    /// Solves implicit function `f` for `args` over `bounds`, checking its
    /// precondition first.
    pub fn solve_implicit(&self, f: &FunctionDef, args: &[Value], bounds: (i64, i64)) -> Result<Value, EvalError> {
        if !f.is_implicit() {
            return Err(RuntimeError::TypeMismatch(format!("`{}` is not implicitly defined", f.name)).into());
        }
        let bindings = bind_args(&f.name, &f.params, args)?;
        let mut ctx = self.ctx(bindings, None, false);
        if let Some(pre) = &f.pre {
            if !bool_of(&self.dispatcher, pre, &mut ctx)? {
                return Err(RuntimeError::PreconditionFailure { name: f.name.clone() }.into());
            }
        }
        Ok(solve_bound(f, bounds, &mut ctx, &self.dispatcher)?)
    }

    /// Evaluates every state initialiser.
    pub fn initial_state(&self, module: &BaseModule) -> Result<State, EvalError> {
        let mut state = State::new();
        for s in &module.state {
            let v = self.eval(&s.init)?;
            if !s.ty.accepts(v.ty()) {
                return Err(EvalError {
                    error: RuntimeError::TypeMismatch(format!(
                        "initialiser of `{}` is {}, expected {}",
                        s.name,
                        v.ty(),
                        s.ty
                    )),
                    span: s.node.span(),
                });
            }
            state.set(&s.name, v.coerce_to(s.ty));
        }
        Ok(state)
    }

    /// Runs operation `name` against a copy of `state`.
    pub fn exec_operation(
        &self,
        state: &State,
        name: &str,
        args: &[Value],
    ) -> Result<(State, Option<Value>), EvalError> {
        self.run_operation(state, name, args, false)
            .map(|(s, v, _)| (s, v))
    }

    /// Like [`Interpreter::exec_operation`] and also returns every state
    /// variable read and write in execution order.
    pub fn exec_operation_logged(
        &self,
        state: &State,
        name: &str,
        args: &[Value],
    ) -> Result<(State, Option<Value>, Vec<Access>), EvalError> {
        self.run_operation(state, name, args, true)
    }

    fn run_operation(
        &self,
        state: &State,
        name: &str,
        args: &[Value],
        log: bool,
    ) -> Result<(State, Option<Value>, Vec<Access>), EvalError> {
        let op = self
            .env
            .operations
            .get(name)
            .ok_or_else(|| RuntimeError::UnknownOperation(name.to_string()))?;
        let bindings = bind_args(name, &op.params, args)?;
        let mut ctx = self.ctx(bindings, Some(state.clone()), log);
        let d = &self.dispatcher;
        if let Some(pre) = &op.pre {
            if !bool_of(d, pre, &mut ctx)? {
                return Err(EvalError {
                    error: RuntimeError::PreconditionFailure { name: name.to_string() },
                    span: pre.span(),
                });
            }
        }
        let result = match d.dispatch(&op.body, &mut ctx)? {
            Flow::Return(v) | Flow::Value(v) => Some(v),
            Flow::Normal => None,
        };
        if let Some(post) = &op.post {
            if !bool_of(d, post, &mut ctx)? {
                return Err(EvalError {
                    error: RuntimeError::PostconditionFailure { name: name.to_string() },
                    span: post.span(),
                });
            }
        }
        Ok((
            ctx.state.take().expect("operation state"),
            result,
            ctx.accesses.take().unwrap_or_default(),
        ))
    }
}

/// Parses `call_text` as a Base-L expression and evaluates it against `module`.
pub fn evaluate(
    module: &BaseModule,
    call_text: &str,
    mode: EvalMode,
    bounds: (i64, i64),
) -> Result<Value, EvalError> {
    let exp = parse_exp(call_text).map_err(|e| EvalError {
        error: RuntimeError::Dispatch(e.message.clone()),
        span: Some(e.span),
    })?;
    let interp = Interpreter::new(
        module,
        EvalOptions {
            mode,
            bounds,
            ..Default::default()
        },
    )?;
    interp.eval(&exp)
}

/// Solves implicit function `name` of `module` for `args`.
pub fn solve_implicit(
    module: &BaseModule,
    name: &str,
    args: &[Value],
    bounds: (i64, i64),
) -> Result<Value, EvalError> {
    let f = module
        .function(name)
        .ok_or_else(|| RuntimeError::UnknownFunction(name.to_string()))?;
    Interpreter::new(module, EvalOptions::solve(bounds))?.solve_implicit(f, args, bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselang::parse_module;

    const ISQRT: &str = "module M\nfunctions\n\
        isqrt(x: int) r: int pre x >= 0 post r*r <= x and (r+1)*(r+1) > x\n\
        f: int -> int\n f(x) == x + 1\n\
        g: int -> real\n g(x) == 10 / x\n\
        h: int -> int\n h(x) == x pre x > 0 post RESULT > 5\n\
        fact: int -> int\n fact(n) == if n <= 1 then 1 else n * fact(n - 1)\n\
        loop: int -> int\n loop(n) == loop(n + 1)\n\
        contra(x: int) r: int post r = x + 1 and r < 0\n\
        half(x: int) y: real post y * 2.0 = x\n";

    fn module() -> BaseModule {
        parse_module(ISQRT).unwrap()
    }

    fn eval(text: &str, mode: EvalMode) -> Result<Value, RuntimeError> {
        evaluate(&module(), text, mode, DEFAULT_BOUNDS).map_err(|e| e.error)
    }

    /// Linear-scan oracle for the integer square root.
    fn isqrt_oracle(x: i64) -> i64 {
        (0..=x).find(|r| (r + 1) * (r + 1) > x).unwrap()
    }

    #[test]
    fn explicit_evaluation() {
        assert_eq!(eval("f(3)", EvalMode::Strict), Ok(Value::Int(4)));
        assert_eq!(eval("fact(5)", EvalMode::Strict), Ok(Value::Int(120)));
        assert_eq!(eval("g(4)", EvalMode::Strict), Ok(Value::Real(2.5)));
        assert_eq!(eval("g(0)", EvalMode::Strict), Err(RuntimeError::DivisionByZero));
        assert_eq!(eval("h(7)", EvalMode::Strict), Ok(Value::Int(7)));
        assert!(matches!(eval("h(0)", EvalMode::Strict), Err(RuntimeError::PreconditionFailure { .. })));
        assert!(matches!(eval("h(3)", EvalMode::Strict), Err(RuntimeError::PostconditionFailure { .. })));
        assert!(matches!(eval("loop(0)", EvalMode::Strict), Err(RuntimeError::RecursionLimit(_))));
        assert!(matches!(eval("nope(1)", EvalMode::Strict), Err(RuntimeError::UnknownFunction(_))));
        assert!(matches!(eval("zz", EvalMode::Strict), Err(RuntimeError::UnboundName(_))));
    }

    #[test]
    fn implicit_strict_vs_solve() {
        assert!(matches!(
            eval("isqrt(10)", EvalMode::Strict),
            Err(RuntimeError::ImplicitEvaluation { ref function }) if function == "isqrt"
        ));
        assert_eq!(eval("isqrt(10)", EvalMode::Solve), Ok(Value::Int(3)));
        assert_eq!(eval("isqrt(0)", EvalMode::Solve), Ok(Value::Int(0)));
        assert_eq!(eval("f(isqrt(16)) * 2", EvalMode::Solve), Ok(Value::Int(10)));
        assert!(matches!(eval("isqrt(-1)", EvalMode::Solve), Err(RuntimeError::PreconditionFailure { .. })));
        assert!(matches!(eval("half(3)", EvalMode::Solve), Err(RuntimeError::UnsupportedImplicit { .. })));
    }

    #[test]
    fn solver_matches_scan_oracle() {
        let m = module();
        for x in 0..=30 {
            let got = solve_implicit(&m, "isqrt", &[Value::Int(x)], (-1000, 1000)).unwrap();
            assert_eq!(got, Value::Int(isqrt_oracle(x)), "x = {x}");
        }
    }

    #[test]
    fn contradiction_has_no_solution() {
        let err = solve_implicit(&module(), "contra", &[Value::Int(5)], (-10, 10)).unwrap_err();
        assert_eq!(
            err.error,
            RuntimeError::NoSolutionInBounds {
                function: "contra".into(),
                lo: -10,
                hi: 10
            }
        );
    }

    const OPS: &str = "module C\nstate\n x : int := 0\n r : real := 0\n\
        operations\n inc() == x := x + 1\n dec() == x := x - 1 pre x > 0\n\
        setdiv(n: int) == r := 10 / n\n\
        get() == (x := x + 1; return x; x := 100)\n\
        bad() == x := x + 1 post x > 5\n";

    #[test]
    fn operations_thread_state_functionally() {
        let m = parse_module(OPS).unwrap();
        let it = Interpreter::new(&m, EvalOptions::default()).unwrap();
        let s0 = it.initial_state(&m).unwrap();
        assert_eq!(s0.get("r"), Some(Value::Real(0.0)));
        let (s1, ret) = it.exec_operation(&s0, "inc", &[]).unwrap();
        assert_eq!(s1.get("x"), Some(Value::Int(1)));
        assert_eq!(ret, None);
        assert_eq!(s0.get("x"), Some(Value::Int(0)));
        let err = it.exec_operation(&s0, "dec", &[]).unwrap_err();
        assert!(matches!(err.error, RuntimeError::PreconditionFailure { .. }));
        let err = it.exec_operation(&s0, "setdiv", &[Value::Int(0)]).unwrap_err();
        assert_eq!(err.error, RuntimeError::DivisionByZero);
        let (s2, ret) = it.exec_operation(&s0, "get", &[]).unwrap();
        assert_eq!((s2.get("x"), ret), (Some(Value::Int(1)), Some(Value::Int(1))));
        assert!(matches!(
            it.exec_operation(&s0, "bad", &[]).unwrap_err().error,
            RuntimeError::PostconditionFailure { .. }
        ));
        assert!(matches!(
            it.exec_operation(&s0, "inc", &[Value::Int(1)]).unwrap_err().error,
            RuntimeError::ArityMismatch { .. }
        ));
    }

    #[test]
    fn access_log_records_reads_and_writes() {
        let m = parse_module(OPS).unwrap();
        let it = Interpreter::new(&m, EvalOptions::default()).unwrap();
        let s0 = it.initial_state(&m).unwrap();
        let (_, _, log) = it.exec_operation_logged(&s0, "inc", &[]).unwrap();
        assert_eq!(
            log,
            vec![
                Access { var: "x".into(), kind: AccessKind::Read, value: Value::Int(0) },
                Access { var: "x".into(), kind: AccessKind::Write, value: Value::Int(1) },
            ]
        );
    }
}
