use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::astspec::{FieldKind, ScalarKind, Schema};
use crate::span::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Int(i64),
    Real(f64),
    Bool(bool),
    Str(String),
    Ident(String),
}

impl Scalar {
    pub fn kind(&self) -> ScalarKind {
        match self {
            Scalar::Int(_) => ScalarKind::Int,
            Scalar::Real(_) => ScalarKind::Real,
            Scalar::Bool(_) => ScalarKind::Bool,
            Scalar::Str(_) => ScalarKind::Str,
            Scalar::Ident(_) => ScalarKind::Ident,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Real(v) => write!(f, "{v:?}"),
            Scalar::Bool(v) => write!(f, "{v}"),
            Scalar::Str(v) => write!(f, "{v:?}"),
            Scalar::Ident(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Scalar(Scalar),
    Node(Node),
    List(Vec<Node>),
    Absent,
}

impl FieldValue {
    pub fn int(v: i64) -> Self {
        FieldValue::Scalar(Scalar::Int(v))
    }

    pub fn real(v: f64) -> Self {
        FieldValue::Scalar(Scalar::Real(v))
    }

    pub fn bool(v: bool) -> Self {
        FieldValue::Scalar(Scalar::Bool(v))
    }

    pub fn str(v: impl Into<String>) -> Self {
        FieldValue::Scalar(Scalar::Str(v.into()))
    }

    pub fn ident(v: impl Into<String>) -> Self {
        FieldValue::Scalar(Scalar::Ident(v.into()))
    }

    pub fn opt(v: Option<Node>) -> Self {
        v.map_or(FieldValue::Absent, FieldValue::Node)
    }
}

impl From<Node> for FieldValue {
    fn from(n: Node) -> Self {
        FieldValue::Node(n)
    }
}

impl From<Vec<Node>> for FieldValue {
    fn from(v: Vec<Node>) -> Self {
        FieldValue::List(v)
    }
}

#[derive(Debug, PartialEq)]
struct NodeData {
    origin: String,
    category: String,
    alternative: String,
    fields: Vec<(String, FieldValue)>,
    span: Option<Span>,
}

/// An immutable, cheaply clonable tree node.
///
/// Nodes do not hold a reference to their schema; they carry the id of the tree
/// whose schema declares their alternative, which is what dispatch routes on.
/// Field accessors such as [`Node::child`] panic when the node does not have
/// the requested field shape, so analyses should only be run on trees built
/// with [`make_node`] or checked with [`super::validate_tree`].
#[derive(Clone, PartialEq)]
pub struct Node(Arc<NodeData>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NodeError {
    #[error("schema `{tree}` has no alternative {category}.{alternative}")]
    UnknownAlternative {
        tree: String,
        category: String,
        alternative: String,
    },
    #[error("{category}.{alternative} has no field `{field}`")]
    UnknownField {
        category: String,
        alternative: String,
        field: String,
    },
    #[error("field `{field}` expects {expected}")]
    FieldShapeMismatch { field: String, expected: String },
}

/// Builds a node of `category.alternative`, checking field shapes against
/// `schema` and stamping the alternative's origin tree.
///
/// Fields may be supplied in any order; they are stored in declaration order.
/// Omitted `opt` fields become [`FieldValue::Absent`].
pub fn make_node<S: Into<String>>(
    schema: &Schema,
    category: &str,
    alternative: &str,
    fields: impl IntoIterator<Item = (S, FieldValue)>,
) -> Result<Node, NodeError> {
    let alt = schema
        .alternative(category, alternative)
        .ok_or_else(|| NodeError::UnknownAlternative {
            tree: schema.tree_id().to_string(),
            category: category.to_string(),
            alternative: alternative.to_string(),
        })?;
    let mut supplied: Vec<(String, FieldValue)> =
        fields.into_iter().map(|(k, v)| (k.into(), v)).collect();
    if let Some((name, _)) = supplied.iter().find(|(name, _)| alt.field(name).is_none()) {
        return Err(NodeError::UnknownField {
            category: category.to_string(),
            alternative: alternative.to_string(),
            field: name.clone(),
        });
    }

    let mut ordered = Vec::with_capacity(alt.fields.len());
    for decl in &alt.fields {
        let value = match supplied.iter().position(|(name, _)| *name == decl.name) {
            Some(i) => supplied.swap_remove(i).1,
            None => FieldValue::Absent,
        };
        if let Some(expected) = shape_error(schema, &decl.kind, &value) {
            return Err(NodeError::FieldShapeMismatch {
                field: decl.name.clone(),
                expected,
            });
        }
        ordered.push((decl.name.clone(), value));
    }

    Ok(Node(Arc::new(NodeData {
        origin: alt.origin.clone(),
        category: category.to_string(),
        alternative: alternative.to_string(),
        fields: ordered,
        span: None,
    })))
}

/// Returns a description of the expected kind when `value` does not fit `kind`.
pub(crate) fn shape_error(schema: &Schema, kind: &FieldKind, value: &FieldValue) -> Option<String> {
    let fits_ref = |node: &Node| {
        let r = kind.node_ref().expect("node-valued kind");
        node.category() == r.category
            && schema
                .category(&r.category)
                .is_some_and(|c| c.origin == node.origin())
    };
    let ok = match (kind, value) {
        (FieldKind::Scalar(s), FieldValue::Scalar(v)) => *s == v.kind(),
        (FieldKind::Node(_), FieldValue::Node(n)) => fits_ref(n),
        (FieldKind::Opt(_), FieldValue::Absent) => true,
        (FieldKind::Opt(_), FieldValue::Node(n)) => fits_ref(n),
        (FieldKind::List(_), FieldValue::List(items)) => items.iter().all(fits_ref),
        _ => false,
    };
    (!ok).then(|| kind.to_string())
}

impl Node {
    /// Builds a node without consulting any schema. Intended for decoding and
    /// for tests that need deliberately malformed trees.
    pub fn new_unchecked(
        origin: impl Into<String>,
        category: impl Into<String>,
        alternative: impl Into<String>,
        fields: Vec<(String, FieldValue)>,
    ) -> Node {
        Node(Arc::new(NodeData {
            origin: origin.into(),
            category: category.into(),
            alternative: alternative.into(),
            fields,
            span: None,
        }))
    }

    pub fn with_span(self, span: Span) -> Node {
        let mut data = Arc::try_unwrap(self.0).unwrap_or_else(|shared| NodeData {
            origin: shared.origin.clone(),
            category: shared.category.clone(),
            alternative: shared.alternative.clone(),
            fields: shared.fields.clone(),
            span: shared.span,
        });
        data.span = Some(span);
        Node(Arc::new(data))
    }

    pub fn origin(&self) -> &str {
        &self.0.origin
    }

    pub fn category(&self) -> &str {
        &self.0.category
    }

    pub fn alternative(&self) -> &str {
        &self.0.alternative
    }

    pub fn is(&self, category: &str, alternative: &str) -> bool {
        self.0.category == category && self.0.alternative == alternative
    }

    pub fn span(&self) -> Option<Span> {
        self.0.span
    }

    pub fn fields(&self) -> &[(String, FieldValue)] {
        &self.0.fields
    }

    pub fn get(&self, field: &str) -> Option<&FieldValue> {
        self.0
            .fields
            .iter()
            .find(|(name, _)| name == field)
            .map(|(_, v)| v)
    }

    fn expect_field(&self, field: &str) -> &FieldValue {
        self.get(field).unwrap_or_else(|| {
            panic!(
                "{}.{} has no field `{field}`",
                self.category(),
                self.alternative()
            )
        })
    }

    fn shape_panic(&self, field: &str, wanted: &str) -> ! {
        panic!(
            "{}.{} field `{field}` is not {wanted}",
            self.category(),
            self.alternative()
        )
    }

    pub fn child(&self, field: &str) -> &Node {
        match self.expect_field(field) {
            FieldValue::Node(n) => n,
            _ => self.shape_panic(field, "a node"),
        }
    }

    pub fn opt_child(&self, field: &str) -> Option<&Node> {
        match self.expect_field(field) {
            FieldValue::Node(n) => Some(n),
            FieldValue::Absent => None,
            _ => self.shape_panic(field, "an optional node"),
        }
    }

    pub fn list(&self, field: &str) -> &[Node] {
        match self.expect_field(field) {
            FieldValue::List(items) => items,
            _ => self.shape_panic(field, "a list"),
        }
    }

    pub fn scalar(&self, field: &str) -> &Scalar {
        match self.expect_field(field) {
            FieldValue::Scalar(s) => s,
            _ => self.shape_panic(field, "a scalar"),
        }
    }

    pub fn int(&self, field: &str) -> i64 {
        match self.scalar(field) {
            Scalar::Int(v) => *v,
            _ => self.shape_panic(field, "an int"),
        }
    }

    pub fn real(&self, field: &str) -> f64 {
        match self.scalar(field) {
            Scalar::Real(v) => *v,
            _ => self.shape_panic(field, "a real"),
        }
    }

    pub fn bool(&self, field: &str) -> bool {
        match self.scalar(field) {
            Scalar::Bool(v) => *v,
            _ => self.shape_panic(field, "a bool"),
        }
    }

    /// Text of a `string` or `ident` field.
    pub fn text(&self, field: &str) -> &str {
        match self.scalar(field) {
            Scalar::Str(v) | Scalar::Ident(v) => v,
            _ => self.shape_panic(field, "text"),
        }
    }

    /// Child nodes in field declaration order, list elements in order.
    pub fn children(&self) -> impl Iterator<Item = &Node> {
        self.0.fields.iter().flat_map(|(_, v)| match v {
            FieldValue::Node(n) => std::slice::from_ref(n).iter(),
            FieldValue::List(items) => items.iter(),
            _ => [].iter(),
        })
    }

    /// Identity comparison: true when both handles share the same allocation.
    pub fn ptr_eq(&self, other: &Node) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.alternative())?;
        for (i, (name, value)) in self.fields().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}: ")?;
            match value {
                FieldValue::Scalar(s) => write!(f, "{s}")?,
                FieldValue::Node(n) => write!(f, "{n}")?,
                FieldValue::Absent => f.write_str("_")?,
                FieldValue::List(items) => {
                    f.write_str("[")?;
                    for (j, n) in items.iter().enumerate() {
                        if j > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{n}")?;
                    }
                    f.write_str("]")?;
                }
            }
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.origin(), self)
    }
}
