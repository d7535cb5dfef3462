//! Co-simulation of a Base-L discrete-event model with a continuous plant.
//!
//! The master is Jacobi style with a fixed sync step `H`: plant outputs are
//! copied into the DE state, the DE side runs up to the next sync time, its
//! shared values become plant inputs, and the plant is integrated with forward
//! Euler over the step.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::baselang::lexer::Tok;
use crate::baselang::parser::{parse_document, PResult, Parser};
use crate::baselang::{
    type_check, type_check_exp_in, AccessKind, BaseModule, EvalError, EvalOptions, Interpreter,
    State, SyntaxError, Type, Value,
};
use crate::span::Span;
use crate::treekit::{traverse, Node, Order};

/// Time comparisons allow this much floating-point slack.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CosimError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("at t = {time}: {context}: {error}")]
    Eval {
        time: f64,
        context: String,
        error: EvalError,
    },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CosimError> {
    Err(CosimError::Invalid(msg.into()))
}

#[derive(Debug, Clone)]
pub struct PlantSpec {
    /// Plant states with initial values, in declaration order.
    pub states: Vec<(String, f64)>,
    /// Derivative expression per plant state.
    pub derivatives: Vec<(String, Node)>,
    /// `(shared variable, plant state)` pairs copied into the DE side.
    pub outputs: Vec<(String, String)>,
    /// Shared variables read by the derivatives.
    pub inputs: Vec<String>,
    /// Euler substep.
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct CosimConfig {
    /// Synchronisation step.
    pub sync_step: f64,
    pub end_time: f64,
    /// `(operation, period)` in declaration order.
    pub agenda: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub module: BaseModule,
    pub plant: PlantSpec,
    pub config: CosimConfig,
}

#[derive(Default)]
struct Sections {
    states: Vec<(String, f64, Span)>,
    derivatives: Vec<(String, Node, Span)>,
    outputs: Vec<(String, String, Span)>,
    h: Option<f64>,
    sync_step: Option<f64>,
    end_time: Option<f64>,
    agenda: Vec<(String, f64, Span)>,
}

fn assign_real(p: &mut Parser<'_>) -> PResult<f64> {
    p.bump();
    p.expect_sym(":=")?;
    p.real_literal()
}

fn plant_section(p: &mut Parser<'_>, s: &mut Sections) -> PResult<()> {
    p.bump();
    loop {
        let plant_state = p.at_kw("state") && *p.peek_at(2) == Tok::Sym(":=");
        if p.at_eof() || (!plant_state && p.at_section_start()) {
            return Ok(());
        }
        if plant_state {
            p.bump();
            let (name, span) = p.ident()?;
            p.expect_sym(":=")?;
            s.states.push((name, p.real_literal()?, span));
        } else if p.eat_kw("deriv") {
            let (name, span) = p.ident()?;
            p.expect_sym(":=")?;
            s.derivatives.push((name, p.exp()?, span));
        } else if p.eat_kw("output") {
            let (shared, span) = p.ident()?;
            p.expect_sym("<-")?;
            let (state, _) = p.ident()?;
            s.outputs.push((shared, state, span));
        } else if p.at_kw("h") {
            s.h = Some(assign_real(p)?);
        } else {
            return p.error("plant entry (`state`, `deriv`, `output` or `h`)");
        }
    }
}

fn cosim_section(p: &mut Parser<'_>, s: &mut Sections) -> PResult<()> {
    p.bump();
    while !p.at_entry_end() {
        if p.at_kw("H") {
            s.sync_step = Some(assign_real(p)?);
        } else if p.at_kw("end") {
            s.end_time = Some(assign_real(p)?);
        } else if p.eat_kw("agenda") {
            let (op, span) = p.ident()?;
            p.expect_kw("every")?;
            s.agenda.push((op, p.real_literal()?, span));
        } else {
            return p.error("cosim entry (`H`, `end` or `agenda`)");
        }
    }
    Ok(())
}

fn free_vars(exp: &Node) -> BTreeSet<String> {
    traverse(exp, Order::Pre)
        .iter()
        .filter(|n| n.alternative() == "Var")
        .map(|n| n.text("name").to_string())
        .collect()
}

/// Parses and validates a scenario file: a Base-L module followed by `plant`
/// and `cosim` sections.
pub fn parse_scenario(text: &str) -> Result<Scenario, CosimError> {
    let mut s = Sections::default();
    let module = parse_document(text, &["plant", "cosim"], |kw, p| match kw {
        "plant" => plant_section(p, &mut s),
        _ => cosim_section(p, &mut s),
    })?;
    let diags = type_check(&module);
    if let Some(d) = diags.first() {
        return invalid(format!("module does not type-check: {d}"));
    }

    let h = s.h.ok_or_else(|| CosimError::Invalid("plant substep `h` is missing".into()))?;
    let sync_step = s.sync_step.ok_or_else(|| CosimError::Invalid("sync step `H` is missing".into()))?;
    let end_time = s.end_time.ok_or_else(|| CosimError::Invalid("`end` is missing".into()))?;
    if h.is_nan() || h <= 0.0 || sync_step.is_nan() || sync_step <= 0.0 || h > sync_step + TIME_EPS {
        return invalid(format!("need 0 < h <= H, found h = {h}, H = {sync_step}"));
    }
    let steps = (end_time / sync_step).round();
    if end_time < 0.0 || (steps * sync_step - end_time).abs() > TIME_EPS {
        return invalid(format!("end = {end_time} is not a multiple of H = {sync_step}"));
    }

    let mut names = HashSet::new();
    for (name, _, span) in &s.states {
        if !names.insert(name.as_str()) {
            return invalid(format!("{span}: duplicate plant state `{name}`"));
        }
    }
    let shared: Vec<(String, Type)> = module
        .state
        .iter()
        .filter(|d| d.shared)
        .map(|d| (d.name.clone(), d.ty))
        .collect();
    let shared_ty = |n: &str| shared.iter().find(|(s, _)| s == n).map(|(_, t)| *t);

    for (name, _, span) in &s.states {
        if !s.derivatives.iter().any(|(d, _, _)| d == name) {
            return invalid(format!("{span}: plant state `{name}` has no derivative"));
        }
    }
    let mut bindings: Vec<(&str, Type)> = s.states.iter().map(|(n, _, _)| (n.as_str(), Type::Real)).collect();
    bindings.extend(shared.iter().map(|(n, t)| (n.as_str(), *t)));
    let mut inputs = BTreeSet::new();
    for (name, exp, span) in &s.derivatives {
        if !names.contains(name.as_str()) {
            return invalid(format!("{span}: derivative of undeclared plant state `{name}`"));
        }
        let (ty, diags) = type_check_exp_in(&module, exp, &bindings);
        if let Some(d) = diags.first() {
            return invalid(format!("derivative of `{name}`: {d}"));
        }
        if !ty.is_some_and(|t| Type::Real.accepts(t)) {
            return invalid(format!("{span}: derivative of `{name}` must be numeric"));
        }
        for v in free_vars(exp) {
            if !names.contains(v.as_str()) && shared_ty(&v).is_some() {
                inputs.insert(v);
            }
        }
    }
    for (var, state, span) in &s.outputs {
        if shared_ty(var) != Some(Type::Real) {
            return invalid(format!("{span}: output target `{var}` must be a shared real state variable"));
        }
        if !names.contains(state.as_str()) {
            return invalid(format!("{span}: output source `{state}` is not a plant state"));
        }
    }
    for (op, period, span) in &s.agenda {
        match module.operation(op) {
            Some(o) if o.params.is_empty() => {}
            Some(_) => return invalid(format!("{span}: agenda operation `{op}` must take no parameters")),
            None => return invalid(format!("{span}: unknown agenda operation `{op}`")),
        }
        if period.is_nan() || *period <= 0.0 {
            return invalid(format!("{span}: agenda period must be positive"));
        }
    }

    Ok(Scenario {
        module,
        plant: PlantSpec {
            states: s.states.into_iter().map(|(n, v, _)| (n, v)).collect(),
            derivatives: s.derivatives.into_iter().map(|(n, e, _)| (n, e)).collect(),
            outputs: s.outputs.into_iter().map(|(v, st, _)| (v, st)).collect(),
            inputs: inputs.into_iter().collect(),
            h,
        },
        config: CosimConfig {
            sync_step,
            end_time,
            agenda: s.agenda.into_iter().map(|(o, p, _)| (o, p)).collect(),
        },
    })
}

/// A logged access to a shared variable.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessEntry {
    /// Scheduled time of the invocation that made the access.
    pub time: f64,
    pub var: String,
    pub kind: AccessKind,
    pub value: Value,
}

/// Everything one [`DeSession::run_until`] call did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub events: Vec<(f64, String)>,
    pub accesses: Vec<AccessEntry>,
}

/// The discrete-event side: a Base-L module with state, a periodic agenda,
/// a clock, and a log of shared-variable accesses.
pub struct DeSession {
    interp: Interpreter,
    state: State,
    shared: BTreeSet<String>,
    agenda: Vec<(String, f64)>,
    fired: Vec<u64>,
    clock: f64,
    access_log: Vec<AccessEntry>,
}

impl DeSession {
    pub fn new(module: &BaseModule, agenda: Vec<(String, f64)>) -> Result<DeSession, CosimError> {
        let eval_err = |error| CosimError::Eval {
            time: 0.0,
            context: "initialisation".into(),
            error,
        };
        let interp = Interpreter::new(module, EvalOptions::default()).map_err(eval_err)?;
        let state = interp.initial_state(module).map_err(eval_err)?;
        Ok(DeSession {
            interp,
            state,
            shared: module.state.iter().filter(|s| s.shared).map(|s| s.name.clone()).collect(),
            fired: vec![0; agenda.len()],
            agenda,
            clock: 0.0,
            access_log: Vec::new(),
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn shared_vars(&self) -> &BTreeSet<String> {
        &self.shared
    }

    pub fn access_log(&self) -> &[AccessEntry] {
        &self.access_log
    }

    /// Sets a state variable from outside, e.g. a plant output.
    pub fn set(&mut self, var: &str, value: Value) {
        self.state.set(var, value);
    }

    /// Runs every agenda invocation scheduled in `(clock, bound]` in time
    /// order, ties broken by agenda order, then sets the clock to `bound`.
    /// Invocation `n >= 1` of an entry with period `p` is scheduled at `n * p`.
    pub fn run_until(&mut self, bound: f64) -> Result<RunOutput, CosimError> {
        if bound + TIME_EPS < self.clock {
            return invalid(format!("time bound {bound} is before the clock {}", self.clock));
        }
        let mut due: Vec<(f64, usize)> = Vec::new();
        for (j, (_, period)) in self.agenda.iter().enumerate() {
            let mut n = self.fired[j] + 1;
            while n as f64 * period <= bound + TIME_EPS {
                due.push((n as f64 * period, j));
                n += 1;
            }
            self.fired[j] = n - 1;
        }
        due.sort_by_key(|&(t, j)| ((t / TIME_EPS).round() as i64, j));

        let mut out = RunOutput::default();
        for (time, j) in due {
            let op = self.agenda[j].0.clone();
            let (next, _, accesses) = self
                .interp
                .exec_operation_logged(&self.state, &op, &[])
                .map_err(|error| CosimError::Eval {
                    time,
                    context: format!("operation `{op}`"),
                    error,
                })?;
            let mut read = HashSet::new();
            for a in accesses {
                if !self.shared.contains(&a.var) {
                    continue;
                }
                if a.kind == AccessKind::Read && !read.insert(a.var.clone()) {
                    continue;
                }
                out.accesses.push(AccessEntry {
                    time,
                    var: a.var,
                    kind: a.kind,
                    value: a.value,
                });
            }
            self.state = next;
            out.events.push((time, op));
        }
        self.access_log.extend(out.accesses.iter().cloned());
        self.clock = bound;
        Ok(out)
    }
}

/// One forward-Euler step: `x' = x + h * f(x, u)`, with all derivatives
/// evaluated on the old state.
pub fn plant_step(
    spec: &PlantSpec,
    interp: &Interpreter,
    plant: &State,
    inputs: &State,
    h: f64,
) -> Result<State, EvalError> {
    let mut env = inputs.clone();
    for (name, v) in plant.iter() {
        env.set(name, v);
    }
    let mut next = plant.clone();
    for (name, exp) in &spec.derivatives {
        let rate = interp.eval_in_state(exp, &env)?.as_real().expect("numeric derivative");
        let x = plant.get(name).and_then(Value::as_real).expect("plant state");
        next.set(name, Value::Real(x + h * rate));
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub t: f64,
    pub plant: Vec<(String, f64)>,
    pub shared: Vec<(String, Value)>,
    /// Agenda invocations made during the step ending at `t`.
    pub events: Vec<(f64, String)>,
    /// DE clock after the step; equals `t`.
    pub de_clock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub rows: Vec<TimelineRow>,
    pub access_log: Vec<AccessEntry>,
}

/// Renders a time point rounded to nanoseconds, so `3 * 0.1` prints as `0.3`.
pub fn fmt_time(t: f64) -> String {
    format!("{}", (t * 1e9).round() / 1e9)
}

impl Timeline {
    /// Tab-separated rendering with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.rows.first() else {
            return out;
        };
        let mut header = vec!["t".to_string()];
        header.extend(first.plant.iter().map(|(n, _)| n.clone()));
        header.extend(first.shared.iter().map(|(n, _)| format!("de.{n}")));
        header.push("events".into());
        out.push_str(&header.join("\t"));
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![fmt_time(r.t)];
            cells.extend(r.plant.iter().map(|(_, v)| format!("{v}")));
            cells.extend(r.shared.iter().map(|(_, v)| v.to_string()));
            if r.events.is_empty() {
                cells.push("-".into());
            } else {
                let evs: Vec<String> = r.events.iter().map(|(t, op)| format!("{op}@{}", fmt_time(*t))).collect();
                cells.push(evs.join(","));
            }
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

fn plant_values(spec: &PlantSpec, plant: &State) -> Vec<(String, f64)> {
    spec.states
        .iter()
        .map(|(n, _)| (n.clone(), plant.get(n).and_then(Value::as_real).unwrap_or(f64::NAN)))
        .collect()
}

/// Runs the master loop from time 0 to the configured end time.
pub fn cosimulate(scenario: &Scenario) -> Result<Timeline, CosimError> {
    let Scenario { module, plant: spec, config } = scenario;
    let mut de = DeSession::new(module, config.agenda.clone())?;
    let interp = Interpreter::new(module, EvalOptions::default()).map_err(|error| CosimError::Eval {
        time: 0.0,
        context: "plant".into(),
        error,
    })?;
    let mut plant = State::new();
    for (name, v) in &spec.states {
        plant.set(name, Value::Real(*v));
    }
    let copy_outputs = |de: &mut DeSession, plant: &State| {
        for (var, state) in &spec.outputs {
            de.set(var, plant.get(state).expect("plant state"));
        }
    };
    let shared_values = |de: &DeSession| -> Vec<(String, Value)> {
        de.shared_vars()
            .iter()
            .map(|v| (v.clone(), de.state().get(v).expect("shared state")))
            .collect()
    };

    copy_outputs(&mut de, &plant);
    let mut rows = vec![TimelineRow {
        t: 0.0,
        plant: plant_values(spec, &plant),
        shared: shared_values(&de),
        events: Vec::new(),
        de_clock: de.clock(),
    }];
    let steps = (config.end_time / config.sync_step).round() as u64;
    for k in 0..steps {
        let t_next = (k + 1) as f64 * config.sync_step;
        let run = de.run_until(t_next)?;

        let mut inputs = State::new();
        for var in &spec.inputs {
            inputs.set(var, de.state().get(var).expect("shared input"));
        }
        let mut elapsed = 0.0;
        while elapsed < config.sync_step - TIME_EPS {
            let h = spec.h.min(config.sync_step - elapsed);
            plant = plant_step(spec, &interp, &plant, &inputs, h).map_err(|error| CosimError::Eval {
                time: k as f64 * config.sync_step + elapsed,
                context: "plant".into(),
                error,
            })?;
            elapsed += h;
        }

        copy_outputs(&mut de, &plant);
        rows.push(TimelineRow {
            t: t_next,
            plant: plant_values(spec, &plant),
            shared: shared_values(&de),
            events: run.events,
            de_clock: de.clock(),
        });
    }
    Ok(Timeline {
        rows,
        access_log: de.access_log,
    })
}
