//! The `treeforge` command line, as a library so it can be driven in-process.
//!
//! Results go to stdout and diagnostics to stderr. Exit codes: 0 success,
//! 1 analysis findings (diagnostics, runtime errors, FAILED verdicts),
//! 2 usage or I/O errors. Flags take precedence over `TREEFORGE_*`
//! environment variables, which take precedence over built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use treeforge_core::baselang::{self, gen_pos, parse_module, type_check, EvalMode, DEFAULT_BOUNDS};
use treeforge_core::ctengine::{self, CtConfig};
use treeforge_core::{cosim, extlang, irgen, BaseModule, Schema};

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: 0, stdout, stderr: String::new() }
    }

    fn findings(stdout: String, stderr: String) -> Self {
        Outcome { code: 1, stdout, stderr }
    }

    fn usage(stderr: String) -> Self {
        Outcome { code: 2, stdout: String::new(), stderr }
    }
}

#[derive(Parser, Debug)]
#[command(name = "treeforge", version, about = "Extensible syntax trees and the language services built on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Work with tree specification files.
    Spec {
        #[command(subcommand)]
        action: SpecAction,
    },
    /// Type-check a Base-L module or Proc-L document.
    Check { module: PathBuf },
    /// Evaluate a call against a Base-L module.
    Eval(EvalArgs),
    /// List proof obligations.
    Po { module: PathBuf },
    /// Combinatorial testing from a module's trace definitions.
    Ct {
        #[command(subcommand)]
        action: CtAction,
    },
    /// Enumerate the traces of a Proc-L process.
    Traces(TracesArgs),
    /// Translate explicit functions to the IR and emit code.
    Codegen(CodegenArgs),
    /// Run a co-simulation scenario and print its timeline.
    Cosim(CosimArgs),
}

#[derive(Subcommand, Debug)]
enum SpecAction {
    /// Compile a spec and print a summary of the schema.
    Check {
        file: PathBuf,
        /// Base spec the file extends.
        #[arg(long)]
        extends: Option<PathBuf>,
    },
}

fn parse_bounds(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, found `{s}`"))?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("lower bound: {e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("upper bound: {e}"))?;
    if lo > hi {
        return Err(format!("lower bound {lo} exceeds upper bound {hi}"));
    }
    Ok((lo, hi))
}

#[derive(Args, Debug)]
struct EvalArgs {
    module: PathBuf,
    /// Call to evaluate, e.g. "f(3)".
    #[arg(long, allow_hyphen_values = true)]
    call: String,
    /// Solve implicit functions by bounded search instead of failing.
    #[arg(long, env = "TREEFORGE_SOLVE")]
    solve: bool,
    /// Search interval for implicit results.
    #[arg(long, env = "TREEFORGE_BOUNDS", value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<(i64, i64)>,
}

#[derive(Subcommand, Debug)]
enum CtAction {
    /// Print the expanded tests.
    Expand(CtArgs),
    /// Execute the expanded tests and print verdicts.
    Run(CtArgs),
}

#[derive(Args, Debug)]
struct CtArgs {
    module: PathBuf,
    /// Name of the trace definition.
    #[arg(long)]
    trace: String,
    /// Keep this fraction of the tests, in (0, 1].
    #[arg(long, env = "TREEFORGE_REDUCE")]
    reduce: Option<f64>,
    /// Seed for reduction.
    #[arg(long, env = "TREEFORGE_SEED", default_value_t = 0)]
    seed: u64,
    /// Only run the test with this expansion index.
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, env = "TREEFORGE_MAX_TESTS", default_value_t = ctengine::DEFAULT_MAX_TESTS)]
    max_tests: usize,
    #[arg(long, env = "TREEFORGE_MAX_REPEAT", default_value_t = ctengine::DEFAULT_MAX_REPEAT)]
    max_repeat: u32,
}

#[derive(Args, Debug)]
struct TracesArgs {
    module: PathBuf,
    #[arg(long)]
    process: String,
    #[arg(long, env = "TREEFORGE_DEPTH", default_value_t = 3)]
    depth: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Emit {
    Pseudo,
}

#[derive(Args, Debug)]
struct CodegenArgs {
    module: PathBuf,
    /// Comma-separated pass list (`fold`, `group`); empty for none.
    #[arg(long, env = "TREEFORGE_PASSES", default_value = "fold,group")]
    passes: String,
    #[arg(long, value_enum, default_value = "pseudo")]
    emit: Emit,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CosimArgs {
    scenario: PathBuf,
    /// Print the shared-variable access log instead of the timeline.
    #[arg(long)]
    accesses: bool,
}

fn read(path: &Path) -> Result<String, Outcome> {
    std::fs::read_to_string(path).map_err(|e| Outcome::usage(format!("error: cannot read {}: {e}\n", path.display())))
}

fn lines<T: std::fmt::Display>(prefix: &str, items: &[T]) -> String {
    items.iter().fold(String::new(), |mut s, d| {
        let _ = writeln!(s, "{prefix}{d}");
        s
    })
}

fn load_module(path: &Path) -> Result<BaseModule, Outcome> {
    let src = read(path)?;
    parse_module(&src).map_err(|e| Outcome::findings(String::new(), format!("{}:{e}\n", path.display())))
}

fn spec_check(file: &Path, extends: Option<&Path>) -> Result<Outcome, Outcome> {
    let fail = |path: &Path, e: treeforge_core::SpecError| {
        Outcome::findings(String::new(), format!("{}: {e}\n", path.display()))
    };
    let schema = match extends {
        Some(base_path) => {
            let base = Schema::compile(&read(base_path)?).map_err(|e| fail(base_path, e))?;
            Schema::compile_extension(&base, &read(file)?).map_err(|e| fail(file, e))?
        }
        None => Schema::compile(&read(file)?).map_err(|e| fail(file, e))?,
    };
    let mut out = format!("tree {}", schema.tree_id());
    if let Some(base) = schema.base_tree_id() {
        let _ = write!(out, " extends {base}");
    }
    out.push('\n');
    for cat in schema.categories() {
        let alts: Vec<&str> = cat.alternatives.keys().map(String::as_str).collect();
        let _ = writeln!(out, "  {} [{}]: {}", cat.name, cat.origin, alts.join(", "));
    }
    Ok(Outcome::ok(out))
}

fn check(path: &Path) -> Result<Outcome, Outcome> {
    let src = read(path)?;
    let diags = if extlang::looks_like_procl(&src) {
        let m = extlang::parse_procl(&src)
            .map_err(|e| Outcome::findings(String::new(), format!("{}:{e}\n", path.display())))?;
        extlang::type_check_ext(&m)
    } else {
        let m = parse_module(&src)
            .map_err(|e| Outcome::findings(String::new(), format!("{}:{e}\n", path.display())))?;
        type_check(&m)
    };
    if diags.is_empty() {
        Ok(Outcome::ok("ok\n".into()))
    } else {
        Ok(Outcome::findings(String::new(), lines(&format!("{}:", path.display()), &diags)))
    }
}

fn eval(args: &EvalArgs) -> Result<Outcome, Outcome> {
    let m = load_module(&args.module)?;
    let mode = if args.solve { EvalMode::Solve } else { EvalMode::Strict };
    match baselang::evaluate(&m, &args.call, mode, args.bounds.unwrap_or(DEFAULT_BOUNDS)) {
        Ok(v) => Ok(Outcome::ok(format!("{v}\n"))),
        Err(e) => Ok(Outcome::findings(String::new(), format!("error: {e}\n"))),
    }
}

fn po(path: &Path) -> Result<Outcome, Outcome> {
    let src = read(path)?;
    let obligations = if extlang::looks_like_procl(&src) {
        let m = extlang::parse_procl(&src)
            .map_err(|e| Outcome::findings(String::new(), format!("{}:{e}\n", path.display())))?;
        extlang::gen_pos_ext(&m)
    } else {
        gen_pos(&load_module(path)?)
    };
    Ok(Outcome::ok(lines("", &obligations)))
}

fn ct(action: &CtAction) -> Result<Outcome, Outcome> {
    let (args, run) = match action {
        CtAction::Expand(a) => (a, false),
        CtAction::Run(a) => (a, true),
    };
    let m = load_module(&args.module)?;
    let finding = |msg: String| Outcome::findings(String::new(), format!("error: {msg}\n"));
    let trace = m
        .trace(&args.trace)
        .ok_or_else(|| finding(format!("no trace named `{}`", args.trace)))?;
    let config = CtConfig {
        max_tests: args.max_tests,
        max_repeat: args.max_repeat,
    };
    let expr = ctengine::parse_trace_expr_with(&trace.text, &config).map_err(|e| finding(e.to_string()))?;
    let mut tests = ctengine::expand(&expr, &config).map_err(|e| finding(e.to_string()))?;
    if let Some(f) = args.reduce {
        tests = ctengine::reduce(&tests, f, args.seed).map_err(|e| Outcome::usage(format!("error: {e}\n")))?;
    }
    if let Some(i) = args.index {
        tests.retain(|t| t.index == i);
        if tests.is_empty() {
            return Err(finding(format!("no test with index {i}")));
        }
    }
    if !run {
        let out = tests.iter().fold(String::new(), |mut s, t| {
            let _ = writeln!(s, "{}\t{t}", t.index);
            s
        });
        return Ok(Outcome::ok(out));
    }
    let diags = type_check(&m);
    if !diags.is_empty() {
        return Err(Outcome::findings(String::new(), lines(&format!("{}:", args.module.display()), &diags)));
    }
    let interp = baselang::Interpreter::new(&m, baselang::EvalOptions::default())
        .map_err(|e| finding(e.to_string()))?;
    let initial = interp.initial_state(&m).map_err(|e| finding(e.to_string()))?;
    let results = ctengine::execute(&tests, &interp, &initial);
    let report = ctengine::report(&results);
    let failed = results.iter().filter(|(_, v)| matches!(v, ctengine::Verdict::Failed { .. })).count();
    if failed > 0 {
        Ok(Outcome::findings(report, format!("{failed} of {} tests FAILED\n", results.len())))
    } else {
        Ok(Outcome::ok(report))
    }
}

fn traces(args: &TracesArgs) -> Result<Outcome, Outcome> {
    let src = read(&args.module)?;
    let m = extlang::parse_procl(&src)
        .map_err(|e| Outcome::findings(String::new(), format!("{}:{e}\n", args.module.display())))?;
    match extlang::enumerate_traces(&m, &args.process, args.depth) {
        Ok(set) => {
            let shown: Vec<String> = set.iter().map(extlang::format_trace).collect();
            Ok(Outcome::ok(lines("", &shown)))
        }
        Err(e) => Ok(Outcome::findings(String::new(), format!("error: {e}\n"))),
    }
}

fn codegen(args: &CodegenArgs) -> Result<Outcome, Outcome> {
    let m = load_module(&args.module)?;
    let passes = irgen::parse_passes(&args.passes).map_err(|e| Outcome::usage(format!("error: {e}\n")))?;
    let ir = irgen::translate(&m).map_err(|e| Outcome::findings(String::new(), format!("error: {e}\n")))?;
    let text = match args.emit {
        Emit::Pseudo => irgen::emit_pseudo(&irgen::run_passes(ir, &passes)),
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| Outcome::usage(format!("error: cannot write {}: {e}\n", path.display())))?;
            Ok(Outcome::ok(String::new()))
        }
        None => Ok(Outcome::ok(text)),
    }
}

fn run_cosim(args: &CosimArgs) -> Result<Outcome, Outcome> {
    let src = read(&args.scenario)?;
    let finding = |e: cosim::CosimError| Outcome::findings(String::new(), format!("{}: {e}\n", args.scenario.display()));
    let scenario = cosim::parse_scenario(&src).map_err(finding)?;
    let timeline = cosim::cosimulate(&scenario).map_err(finding)?;
    if args.accesses {
        let out = timeline.access_log.iter().fold(String::new(), |mut s, a| {
            let kind = match a.kind {
                baselang::AccessKind::Read => "read",
                baselang::AccessKind::Write => "write",
            };
            let _ = writeln!(s, "{}\t{}\t{kind}\t{}", cosim::fmt_time(a.time), a.var, a.value);
            s
        });
        return Ok(Outcome::ok(out));
    }
    Ok(Outcome::ok(timeline.to_tsv()))
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome::usage(text)
            } else {
                Outcome::ok(text)
            };
        }
    };
    let result = match &cli.command {
        Command::Spec { action: SpecAction::Check { file, extends } } => spec_check(file, extends.as_deref()),
        Command::Check { module } => check(module),
        Command::Eval(a) => eval(a),
        Command::Po { module } => po(module),
        Command::Ct { action } => ct(action),
        Command::Traces(a) => traces(a),
        Command::Codegen(a) => codegen(a),
        Command::Cosim(a) => run_cosim(a),
    };
    result.unwrap_or_else(|o| o)
}
