//! Generic tree runtime and extension-aware analysis dispatch.

mod dispatch;
mod node;

use std::fmt;

pub use dispatch::{Analysis, DispatchError, DispatchRecord, Dispatcher, Handler, RegistrationError};
pub use node::{make_node, FieldValue, Node, NodeError, Scalar};

use crate::astspec::{FieldKind, Schema};
use crate::span::Span;

/// A structural problem found by [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub span: Option<Span>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(span) => write!(f, "{span}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Checks every node under `root` against `schema`. Returns one diagnostic
/// per violation; an empty list means the tree is well formed.
pub fn validate_tree(schema: &Schema, root: &Node) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    validate_into(schema, root, &mut out);
    out
}

fn validate_into(schema: &Schema, node: &Node, out: &mut Vec<Diagnostic>) {
    let mut report = |message: String| {
        out.push(Diagnostic {
            span: node.span(),
            message,
        })
    };
    let label = format!("{}.{}", node.category(), node.alternative());
    match schema.alternative(node.category(), node.alternative()) {
        None => report(format!("{label} is not declared in `{}`", schema.tree_id())),
        Some(alt) => {
            if alt.origin != node.origin() {
                report(format!(
                    "{label} has origin `{}` but the schema declares it in `{}`",
                    node.origin(),
                    alt.origin
                ));
            }
            for decl in &alt.fields {
                match node.get(&decl.name) {
                    None if matches!(decl.kind, FieldKind::Opt(_)) => {}
                    None => report(format!("{label} is missing field `{}`", decl.name)),
                    Some(value) => {
                        if let Some(expected) = node::shape_error(schema, &decl.kind, value) {
                            report(format!(
                                "{label} field `{}` expects {expected}",
                                decl.name
                            ));
                        }
                    }
                }
            }
            for (name, _) in node.fields() {
                if alt.field(name).is_none() {
                    report(format!("{label} has undeclared field `{name}`"));
                }
            }
        }
    }
    for child in node.children() {
        validate_into(schema, child, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Pre,
    Post,
}

/// Flattens the tree rooted at `root`. Children follow field declaration
/// order, list elements their stored order.
pub fn traverse(root: &Node, order: Order) -> Vec<Node> {
    fn walk(node: &Node, order: Order, out: &mut Vec<Node>) {
        if order == Order::Pre {
            out.push(node.clone());
        }
        for child in node.children() {
            walk(child, order, out);
        }
        if order == Order::Post {
            out.push(node.clone());
        }
    }
    let mut out = Vec::new();
    walk(root, order, &mut out);
    out
}
