//! Combinatorial testing: trace expressions are expanded into concrete call
//! sequences, executed against fresh operation state, and optionally reduced
//! to a reproducible random subset.

use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselang::parser::Parser;
use crate::baselang::{Interpreter, RuntimeError, State, SyntaxError, Value};
use crate::baselang::lexer::Tok;

/// Default cap on the number of expanded tests.
pub const DEFAULT_MAX_TESTS: usize = 100_000;
/// Default cap on the upper bound of a repetition.
pub const DEFAULT_MAX_REPEAT: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtConfig {
    pub max_tests: usize,
    pub max_repeat: u32,
}

impl Default for CtConfig {
    fn default() -> Self {
        CtConfig {
            max_tests: DEFAULT_MAX_TESTS,
            max_repeat: DEFAULT_MAX_REPEAT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("BoundsError: repetition bounds {{{lo},{hi}}} have lower bound above upper bound")]
    Bounds { lo: u32, hi: u32 },
    #[error("BoundsError: repetition bound {hi} exceeds the limit of {max}")]
    RepeatLimit { hi: u32, max: u32 },
    #[error("ExpansionBudgetExceeded: trace expands to {count} tests, more than {max}")]
    ExpansionBudgetExceeded { count: u128, max: usize },
    #[error("reduction factor {0} is outside (0, 1]")]
    InvalidFactor(f64),
}

/// One operation call with literal arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub op: String,
    pub args: Vec<Value>,
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.op)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceExpr {
    Call(Call),
    Seq(Vec<TraceExpr>),
    Alt(Vec<TraceExpr>),
    Repeat { inner: Box<TraceExpr>, lo: u32, hi: u32 },
}

impl TraceExpr {
    /// Every call in source order, as `(operation, arguments)`.
    pub fn calls(&self) -> Vec<(&str, &[Value])> {
        let mut out = Vec::new();
        self.collect_calls(&mut out);
        out
    }

    fn collect_calls<'a>(&'a self, out: &mut Vec<(&'a str, &'a [Value])>) {
        match self {
            TraceExpr::Call(c) => out.push((&c.op, &c.args)),
            TraceExpr::Seq(es) | TraceExpr::Alt(es) => es.iter().for_each(|e| e.collect_calls(out)),
            TraceExpr::Repeat { inner, .. } => inner.collect_calls(out),
        }
    }

    /// Number of tests [`expand`] produces, saturating at `u128::MAX`.
    pub fn count(&self) -> u128 {
        match self {
            TraceExpr::Call(_) => 1,
            TraceExpr::Seq(es) => es.iter().fold(1u128, |acc, e| acc.saturating_mul(e.count())),
            TraceExpr::Alt(es) => es.iter().fold(0u128, |acc, e| acc.saturating_add(e.count())),
            TraceExpr::Repeat { inner, lo, hi } => {
                let n = inner.count();
                (*lo..=*hi).fold(0u128, |acc, k| acc.saturating_add(n.saturating_pow(k)))
            }
        }
    }
}

impl fmt::Display for TraceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, es: &[TraceExpr], sep: &str| -> fmt::Result {
            f.write_str("(")?;
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{e}")?;
            }
            f.write_str(")")
        };
        match self {
            TraceExpr::Call(c) => write!(f, "{c}"),
            TraceExpr::Seq(es) => join(f, es, " ; "),
            TraceExpr::Alt(es) => join(f, es, " | "),
            TraceExpr::Repeat { inner, lo, hi } => write!(f, "{inner}{{{lo},{hi}}}"),
        }
    }
}

struct TraceParser<'s> {
    p: Parser<'s>,
    max_repeat: u32,
}

impl TraceParser<'_> {
    fn alt(&mut self) -> Result<TraceExpr, CtError> {
        let mut items = vec![self.seq()?];
        while self.p.eat_sym("|") {
            items.push(self.seq()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { TraceExpr::Alt(items) })
    }

    fn seq(&mut self) -> Result<TraceExpr, CtError> {
        let mut items = vec![self.postfix()?];
        while self.p.eat_sym(";") {
            items.push(self.postfix()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { TraceExpr::Seq(items) })
    }

    fn bound(&mut self) -> Result<u32, CtError> {
        match *self.p.peek() {
            Tok::Int(v) if (0..=u32::MAX as i64).contains(&v) => {
                self.p.bump();
                Ok(v as u32)
            }
            _ => Ok(self.p.error("repetition bound")?),
        }
    }

    fn postfix(&mut self) -> Result<TraceExpr, CtError> {
        let mut e = self.primary()?;
        while self.p.eat_sym("{") {
            let lo = self.bound()?;
            self.p.expect_sym(",")?;
            let hi = self.bound()?;
            self.p.expect_sym("}")?;
            if lo > hi {
                return Err(CtError::Bounds { lo, hi });
            }
            if hi > self.max_repeat {
                return Err(CtError::RepeatLimit { hi, max: self.max_repeat });
            }
            e = TraceExpr::Repeat { inner: Box::new(e), lo, hi };
        }
        Ok(e)
    }

    fn literal(&mut self) -> Result<Value, CtError> {
        let negative = self.p.eat_sym("-");
        let v = match self.p.peek().clone() {
            Tok::Int(v) => Value::Int(if negative { -v } else { v }),
            Tok::Real(v) => Value::Real(if negative { -v } else { v }),
            Tok::Ident(w) if !negative && (w == "true" || w == "false") => Value::Bool(w == "true"),
            _ => return Ok(self.p.error("literal argument")?),
        };
        self.p.bump();
        Ok(v)
    }

    fn primary(&mut self) -> Result<TraceExpr, CtError> {
        if self.p.eat_sym("(") {
            let e = self.alt()?;
            self.p.expect_sym(")")?;
            return Ok(e);
        }
        let (op, _) = self.p.ident()?;
        self.p.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.p.at_sym(")") {
            loop {
                args.push(self.literal()?);
                if !self.p.eat_sym(",") {
                    break;
                }
            }
        }
        self.p.expect_sym(")")?;
        Ok(TraceExpr::Call(Call { op, args }))
    }
}

/// Parses a trace expression with the default repetition limit.
pub fn parse_trace_expr(text: &str) -> Result<TraceExpr, CtError> {
    parse_trace_expr_with(text, &CtConfig::default())
}

pub fn parse_trace_expr_with(text: &str, config: &CtConfig) -> Result<TraceExpr, CtError> {
    let mut tp = TraceParser {
        p: Parser::new(text, &[])?,
        max_repeat: config.max_repeat,
    };
    let e = tp.alt()?;
    if !tp.p.at_eof() {
        return Ok(tp.p.error("`;`, `|`, `{` or end of trace")?);
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    /// Position in the full expansion order.
    pub index: usize,
    pub calls: Vec<Call>,
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.calls.is_empty() {
            return f.write_str("<empty>");
        }
        for (i, c) in self.calls.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn expand_seqs(e: &TraceExpr) -> Vec<Vec<Call>> {
    fn product(prefixes: Vec<Vec<Call>>, suffixes: &[Vec<Call>]) -> Vec<Vec<Call>> {
        let mut out = Vec::with_capacity(prefixes.len() * suffixes.len());
        for p in &prefixes {
            for s in suffixes {
                let mut t = p.clone();
                t.extend(s.iter().cloned());
                out.push(t);
            }
        }
        out
    }
    match e {
        TraceExpr::Call(c) => vec![vec![c.clone()]],
        TraceExpr::Seq(es) => es
            .iter()
            .fold(vec![Vec::new()], |acc, e| product(acc, &expand_seqs(e))),
        TraceExpr::Alt(es) => es.iter().flat_map(expand_seqs).collect(),
        TraceExpr::Repeat { inner, lo, hi } => {
            let one = expand_seqs(inner);
            let mut out = Vec::new();
            let mut layer = vec![Vec::new()];
            for k in 0..=*hi {
                if k >= *lo {
                    out.extend(layer.iter().cloned());
                }
                if k < *hi {
                    layer = product(layer, &one);
                }
            }
            out
        }
    }
}

/// Expands `expr` into test cases in deterministic order.
pub fn expand(expr: &TraceExpr, config: &CtConfig) -> Result<Vec<TestCase>, CtError> {
    let count = expr.count();
    if count > config.max_tests as u128 {
        return Err(CtError::ExpansionBudgetExceeded {
            count,
            max: config.max_tests,
        });
    }
    Ok(expand_seqs(expr)
        .into_iter()
        .enumerate()
        .map(|(index, calls)| TestCase { index, calls })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Passed,
    /// A runtime error or postcondition violation at call `index`.
    Failed { reason: String, index: usize },
    /// A precondition blocked call `index`.
    Inconclusive { index: usize },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Passed => "PASSED",
            Verdict::Failed { .. } => "FAILED",
            Verdict::Inconclusive { .. } => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Passed => f.write_str("PASSED"),
            Verdict::Failed { reason, index } => write!(f, "FAILED({reason}, {index})"),
            Verdict::Inconclusive { index } => write!(f, "INCONCLUSIVE({index})"),
        }
    }
}

/// Runs one test from a copy of `initial`.
pub fn run_test(test: &TestCase, interp: &Interpreter, initial: &State) -> Verdict {
    let mut state = initial.clone();
    for (index, call) in test.calls.iter().enumerate() {
        match interp.exec_operation(&state, &call.op, &call.args) {
            Ok((next, _)) => state = next,
            Err(e) => {
                return match e.error {
                    RuntimeError::PreconditionFailure { .. } => Verdict::Inconclusive { index },
                    other => Verdict::Failed {
                        reason: other.to_string(),
                        index,
                    },
                }
            }
        }
    }
    Verdict::Passed
}

/// Executes each test in isolation; results follow input order.
pub fn execute(tests: &[TestCase], interp: &Interpreter, initial: &State) -> Vec<(TestCase, Verdict)> {
    tests
        .iter()
        .map(|t| (t.clone(), run_test(t, interp, initial)))
        .collect()
}

/// Selects `ceil(factor * N)` tests uniformly at random, seeded, keeping their
/// relative order and original indices.
pub fn reduce(tests: &[TestCase], factor: f64, seed: u64) -> Result<Vec<TestCase>, CtError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(CtError::InvalidFactor(factor));
    }
    let n = tests.len();
    if factor == 1.0 || n == 0 {
        return Ok(tests.to_vec());
    }
    // The epsilon keeps products like 0.1 * 100 from rounding up to 11.
    let k = ((factor * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| tests[i].clone()).collect())
}

/// Line-oriented report: `index<TAB>verdict<TAB>detail`.
pub fn report(results: &[(TestCase, Verdict)]) -> String {
    let mut out = String::new();
    for (t, v) in results {
        let detail = match v {
            Verdict::Passed => t.to_string(),
            Verdict::Failed { reason, index } => format!("call {index} `{}`: {reason}", t.calls[*index]),
            Verdict::Inconclusive { index } => {
                format!("call {index} `{}`: precondition does not hold", t.calls[*index])
            }
        };
        out.push_str(&format!("{}\t{}\t{detail}\n", t.index, v.label()));
    }
    out
}
