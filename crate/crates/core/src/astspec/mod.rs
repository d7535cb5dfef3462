//! Tree specification files and the schemas compiled from them.
//!
//! A specification file declares a tree: a set of categories, each with a list
//! of alternatives, each alternative with typed fields. An extension file names
//! a base tree and may add new categories whose fields point back into the base
//! tree with `base::Category`.
//!
//! ```text
//! # comments run to end of line
//! tree ProcL extends BaseL
//! node Proc =
//!   | Stop()
//!   | Guard(cond: base::Exp, body: Proc)
//! ```

mod parser;
mod schema;

use std::fmt;

use thiserror::Error;

use crate::span::Pos;

pub use parser::parse_spec;
pub use schema::{build_schema, extend_schema, Alternative, Category, Field, Schema};

/// Scalar field payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Int,
    Real,
    Bool,
    Str,
    Ident,
}

impl ScalarKind {
    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "int" => ScalarKind::Int,
            "real" => ScalarKind::Real,
            "bool" => ScalarKind::Bool,
            "string" => ScalarKind::Str,
            "ident" => ScalarKind::Ident,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ScalarKind::Int => "int",
            ScalarKind::Real => "real",
            ScalarKind::Bool => "bool",
            ScalarKind::Str => "string",
            ScalarKind::Ident => "ident",
        }
    }
}

/// Reference to a category.
///
/// In a [`SpecAst`] `tree` is the qualifier as written (`base::Exp` gives
/// `Some("base")`). In a compiled [`Schema`] it is always the id of the tree
/// that declares the category.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub category: String,
    pub tree: Option<String>,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.tree {
            Some(tree) => write!(f, "{}::{}", tree, self.category),
            None => f.write_str(&self.category),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Scalar(ScalarKind),
    Node(NodeRef),
    List(NodeRef),
    Opt(NodeRef),
}

impl FieldKind {
    pub fn node_ref(&self) -> Option<&NodeRef> {
        match self {
            FieldKind::Scalar(_) => None,
            FieldKind::Node(r) | FieldKind::List(r) | FieldKind::Opt(r) => Some(r),
        }
    }

    pub(crate) fn node_ref_mut(&mut self) -> Option<&mut NodeRef> {
        match self {
            FieldKind::Scalar(_) => None,
            FieldKind::Node(r) | FieldKind::List(r) | FieldKind::Opt(r) => Some(r),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Scalar(s) => f.write_str(s.keyword()),
            FieldKind::Node(r) => write!(f, "{r}"),
            FieldKind::List(r) => write!(f, "list {r}"),
            FieldKind::Opt(r) => write!(f, "opt {r}"),
        }
    }
}

/// Parsed, unresolved form of a specification file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecAst {
    pub tree_id: String,
    pub extends: Option<String>,
    pub pos: Pos,
    pub categories: Vec<CategoryDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDecl {
    pub name: String,
    pub pos: Pos,
    pub alternatives: Vec<AlternativeDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeDecl {
    pub name: String,
    pub pos: Pos,
    pub fields: Vec<FieldDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub pos: Pos,
    pub kind: FieldKind,
    pub kind_pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{second}: duplicate {what} `{name}` (first declared at {first})")]
    DuplicateName {
        what: &'static str,
        name: String,
        first: Pos,
        second: Pos,
    },
    #[error("{pos}: unresolved reference to category `{category}`")]
    UnresolvedReference { category: String, pos: Pos },
    #[error("{pos}: tree qualifier `{qualifier}` used in a tree with no base")]
    QualifierWithoutBase { qualifier: String, pos: Pos },
    #[error("{pos}: tree qualifier `{qualifier}` does not name the base tree `{base}`")]
    UnknownQualifier {
        qualifier: String,
        base: String,
        pos: Pos,
    },
    #[error("extension of `{expected}` applied to base tree `{found}`")]
    BaseMismatch { expected: String, found: String },
    #[error("tree `{tree}` extends `{base}` and needs that base schema")]
    MissingBase { tree: String, base: String },
    #[error("{pos}: extension redeclares base category `{category}`")]
    IllegalOverride { category: String, pos: Pos },
    #[error("extension tree id `{tree}` collides with its base")]
    TreeIdCollision { tree: String },
    #[error("base tree `{base}` is itself an extension; extensions of extensions are not supported")]
    NestedExtension { base: String },
}
