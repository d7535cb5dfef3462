//! Base-L, the demonstration base notation.
//!
//! Every analysis here (type checking, interpretation, proof obligations) is a
//! [`crate::treekit::Analysis`] over the Base-L schema, so extensions can
//! register their own analyses next to these and delegate base nodes back.

mod interp;
pub(crate) mod lexer;
pub(crate) mod parser;
mod pos;
mod render;
mod typecheck;
mod value;

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::astspec::Schema;
use crate::span::Span;
use crate::treekit::Node;

pub use interp::{
    base_interpreter, evaluate, solve_implicit, Access, AccessKind, EvalCtx, EvalError, EvalMode,
    EvalDispatcher, EvalOptions, Flow, Interpreter, RuntimeError, State, DEFAULT_BOUNDS,
};
pub use parser::{parse_exp, parse_module};
pub use pos::{
    base_po_generator, gen_pos, gen_pos_exp, gen_pos_with, Obligation, ObligationKind, PoCtx,
    PoDispatcher,
};
pub use render::render_exp;
pub use typecheck::{
    base_type_checker, type_check, type_check_exp, type_check_exp_in, type_check_with, TypeCtx,
    TypeDispatcher,
};
pub use value::{apply_binary, apply_unary, Value};

/// Tree id of the Base-L schema.
pub const TREE_ID: &str = "BaseL";

/// The bundled Base-L tree specification.
pub const SPEC: &str = include_str!("../../specs/basel.ast");

/// The compiled Base-L schema.
pub fn schema() -> &'static Schema {
    static SCHEMA: OnceLock<Schema> = OnceLock::new();
    SCHEMA.get_or_init(|| Schema::compile(SPEC).expect("bundled Base-L spec compiles"))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: syntax error: {message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Real,
    Bool,
}

impl Type {
    pub fn from_name(name: &str) -> Option<Type> {
        match name {
            "int" => Some(Type::Int),
            "real" => Some(Type::Real),
            "bool" => Some(Type::Bool),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Type::Int => "int",
            Type::Real => "real",
            Type::Bool => "bool",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }

    /// `int` values are accepted where `real` is expected.
    pub fn accepts(self, actual: Type) -> bool {
        self == actual || (self == Type::Real && actual == Type::Int)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

fn params_of(def: &Node) -> Vec<Param> {
    def.list("params")
        .iter()
        .map(|p| Param {
            name: p.text("name").to_string(),
            ty: Type::from_name(p.text("type")).expect("parser only admits known types"),
        })
        .collect()
}

fn type_field(def: &Node, field: &str) -> Type {
    Type::from_name(def.text(field)).expect("parser only admits known types")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueDef {
    pub name: String,
    pub exp: Node,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub name: String,
    pub ty: Type,
    pub init: Node,
    pub shared: bool,
    pub node: Node,
}

/// A function, explicit (`body` present) or implicit (`post` only).
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    /// Name bound to the result in `post`; `RESULT` for explicit functions.
    pub result_name: String,
    pub result: Type,
    pub body: Option<Node>,
    pub pre: Option<Node>,
    pub post: Option<Node>,
    pub node: Node,
}

impl FunctionDef {
    pub fn is_implicit(&self) -> bool {
        self.body.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Node,
    pub pre: Option<Node>,
    pub post: Option<Node>,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDef {
    pub name: String,
    pub text: String,
    pub node: Node,
}

/// A parsed Base-L module: the `Def` nodes in source order plus typed views
/// of them.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModule {
    pub name: String,
    pub defs: Vec<Node>,
    pub values: Vec<ValueDef>,
    pub state: Vec<StateDef>,
    pub functions: Vec<FunctionDef>,
    pub operations: Vec<OperationDef>,
    pub traces: Vec<TraceDef>,
}

impl BaseModule {
    /// Builds the typed views over `defs`, which must be valid Base-L `Def`
    /// nodes other than `Param`.
    pub fn from_defs(name: impl Into<String>, defs: Vec<Node>) -> BaseModule {
        let mut module = BaseModule {
            name: name.into(),
            defs: Vec::new(),
            values: Vec::new(),
            state: Vec::new(),
            functions: Vec::new(),
            operations: Vec::new(),
            traces: Vec::new(),
        };
        for def in &defs {
            let name = def.text("name").to_string();
            match def.alternative() {
                "ValueDef" => module.values.push(ValueDef {
                    name,
                    exp: def.child("value").clone(),
                    node: def.clone(),
                }),
                "StateDef" => module.state.push(StateDef {
                    name,
                    ty: type_field(def, "type"),
                    init: def.child("init").clone(),
                    shared: def.bool("shared"),
                    node: def.clone(),
                }),
                "ExplicitFn" => module.functions.push(FunctionDef {
                    name,
                    params: params_of(def),
                    result_name: "RESULT".into(),
                    result: type_field(def, "result"),
                    body: Some(def.child("body").clone()),
                    pre: def.opt_child("pre").cloned(),
                    post: def.opt_child("post").cloned(),
                    node: def.clone(),
                }),
                "ImplicitFn" => module.functions.push(FunctionDef {
                    name,
                    params: params_of(def),
                    result_name: def.text("resultName").to_string(),
                    result: type_field(def, "result"),
                    body: None,
                    pre: def.opt_child("pre").cloned(),
                    post: Some(def.child("post").clone()),
                    node: def.clone(),
                }),
                "OpDef" => module.operations.push(OperationDef {
                    name,
                    params: params_of(def),
                    body: def.child("body").clone(),
                    pre: def.opt_child("pre").cloned(),
                    post: def.opt_child("post").cloned(),
                    node: def.clone(),
                }),
                "TraceDef" => module.traces.push(TraceDef {
                    name,
                    text: def.text("expr").to_string(),
                    node: def.clone(),
                }),
                other => panic!("`{other}` is not a top-level definition"),
            }
        }
        module.defs = defs;
        module
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn operation(&self, name: &str) -> Option<&OperationDef> {
        self.operations.iter().find(|o| o.name == name)
    }

    pub fn trace(&self, name: &str) -> Option<&TraceDef> {
        self.traces.iter().find(|t| t.name == name)
    }

    pub fn state_def(&self, name: &str) -> Option<&StateDef> {
        self.state.iter().find(|s| s.name == name)
    }
}
