use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;
use thiserror::Error;

use super::Node;
use crate::span::Span;

/// Handler signature shared by every analysis: the node, the caller's context
/// and the dispatcher to recurse through.
pub type Handler<C, R, E> = Rc<dyn Fn(&Node, &mut C, &Dispatcher<C, R, E>) -> Result<R, DispatchError<E>>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError<E> {
    #[error("no analysis registered for tree `{tree_id}` (node {category}.{alternative})")]
    MissingAnalysis {
        tree_id: String,
        category: String,
        alternative: String,
        span: Option<Span>,
    },
    #[error("analysis for `{tree_id}` has no handler for {category}.{alternative}")]
    NoHandler {
        tree_id: String,
        category: String,
        alternative: String,
        span: Option<Span>,
    },
    #[error("{}{error}", .span.map(|s| format!("{s}: ")).unwrap_or_default())]
    Handler { error: E, span: Option<Span> },
}

impl<E> DispatchError<E> {
    /// Wraps an analysis failure; the dispatcher fills in the span of the
    /// innermost node that has one.
    pub fn handler(error: E) -> Self {
        DispatchError::Handler { error, span: None }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            DispatchError::MissingAnalysis { span, .. }
            | DispatchError::NoHandler { span, .. }
            | DispatchError::Handler { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistrationError {
    #[error("an analysis for tree `{0}` is already registered")]
    DuplicateRegistration(String),
    #[error("analysis serves tree `{analysis}` but was registered for `{requested}`")]
    TreeMismatch { requested: String, analysis: String },
}

/// Handler table for the nodes of one tree.
///
/// Lookup order is exact `(category, alternative)` pair, then the category
/// default, then the global default.
pub struct Analysis<C, R, E> {
    tree_id: String,
    handlers: HashMap<String, HashMap<String, Handler<C, R, E>>>,
    category_defaults: HashMap<String, Handler<C, R, E>>,
    global_default: Option<Handler<C, R, E>>,
}

impl<C, R, E> Clone for Analysis<C, R, E> {
    fn clone(&self) -> Self {
        Analysis {
            tree_id: self.tree_id.clone(),
            handlers: self.handlers.clone(),
            category_defaults: self.category_defaults.clone(),
            global_default: self.global_default.clone(),
        }
    }
}

impl<C, R, E> Analysis<C, R, E> {
    pub fn new(tree_id: impl Into<String>) -> Self {
        Analysis {
            tree_id: tree_id.into(),
            handlers: HashMap::new(),
            category_defaults: HashMap::new(),
            global_default: None,
        }
    }

    pub fn tree_id(&self) -> &str {
        &self.tree_id
    }

    pub fn on<F>(mut self, category: &str, alternative: &str, handler: F) -> Self
    where
        F: Fn(&Node, &mut C, &Dispatcher<C, R, E>) -> Result<R, DispatchError<E>> + 'static,
    {
        self.handlers
            .entry(category.to_string())
            .or_default()
            .insert(alternative.to_string(), Rc::new(handler));
        self
    }

    pub fn on_category<F>(mut self, category: &str, handler: F) -> Self
    where
        F: Fn(&Node, &mut C, &Dispatcher<C, R, E>) -> Result<R, DispatchError<E>> + 'static,
    {
        self.category_defaults
            .insert(category.to_string(), Rc::new(handler));
        self
    }

    pub fn otherwise<F>(mut self, handler: F) -> Self
    where
        F: Fn(&Node, &mut C, &Dispatcher<C, R, E>) -> Result<R, DispatchError<E>> + 'static,
    {
        self.global_default = Some(Rc::new(handler));
        self
    }

    pub fn lookup(&self, category: &str, alternative: &str) -> Option<&Handler<C, R, E>> {
        self.handlers
            .get(category)
            .and_then(|alts| alts.get(alternative))
            .or_else(|| self.category_defaults.get(category))
            .or(self.global_default.as_ref())
    }

    /// Exact-pair handlers, sorted.
    pub fn handled_pairs(&self) -> Vec<(String, String)> {
        let mut pairs: Vec<(String, String)> = self
            .handlers
            .iter()
            .flat_map(|(c, alts)| alts.keys().map(move |a| (c.clone(), a.clone())))
            .collect();
        pairs.sort();
        pairs
    }
}

/// One dispatch, as recorded by [`Dispatcher::enable_log`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchRecord {
    pub category: String,
    pub alternative: String,
    pub origin: String,
    pub handler_owner: String,
}

impl fmt::Display for DispatchRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{},{})",
            self.category, self.alternative, self.origin, self.handler_owner
        )
    }
}

/// Routes each node to the analysis registered for the node's origin tree.
///
/// Handlers recurse by calling [`Dispatcher::dispatch`] on children, so an
/// extension analysis regains control for every extension node below a base
/// subtree. A dispatcher serves one analysis run at a time.
pub struct Dispatcher<C, R, E> {
    analyses: IndexMap<String, Analysis<C, R, E>>,
    counters: RefCell<BTreeMap<String, u64>>,
    log: RefCell<Option<Vec<DispatchRecord>>>,
}

impl<C, R, E> Default for Dispatcher<C, R, E> {
    fn default() -> Self {
        Dispatcher {
            analyses: IndexMap::new(),
            counters: RefCell::new(BTreeMap::new()),
            log: RefCell::new(None),
        }
    }
}

impl<C, R, E> Dispatcher<C, R, E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        mut self,
        tree_id: &str,
        analysis: Analysis<C, R, E>,
    ) -> Result<Self, RegistrationError> {
        if analysis.tree_id != tree_id {
            return Err(RegistrationError::TreeMismatch {
                requested: tree_id.to_string(),
                analysis: analysis.tree_id.clone(),
            });
        }
        if self.analyses.contains_key(tree_id) {
            return Err(RegistrationError::DuplicateRegistration(tree_id.to_string()));
        }
        self.analyses.insert(tree_id.to_string(), analysis);
        Ok(self)
    }

    pub fn analysis(&self, tree_id: &str) -> Option<&Analysis<C, R, E>> {
        self.analyses.get(tree_id)
    }

    pub fn len(&self) -> usize {
        self.analyses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.analyses.is_empty()
    }

    /// Starts recording a [`DispatchRecord`] per dispatch.
    pub fn enable_log(&self) {
        self.log.borrow_mut().get_or_insert_with(Vec::new);
    }

    pub fn take_log(&self) -> Vec<DispatchRecord> {
        self.log
            .borrow_mut()
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }

    /// The recorded log as `(category,alternative,origin,handlerOwner)` lines.
    pub fn log_text(&self) -> String {
        let log = self.log.borrow();
        let mut out = String::new();
        for record in log.iter().flatten() {
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }

    pub fn counters(&self) -> BTreeMap<String, u64> {
        self.counters.borrow().clone()
    }

    pub fn count(&self, tree_id: &str) -> u64 {
        self.counters.borrow().get(tree_id).copied().unwrap_or(0)
    }

    pub fn reset_counters(&self) {
        self.counters.borrow_mut().clear();
    }

    pub fn dispatch(&self, node: &Node, ctx: &mut C) -> Result<R, DispatchError<E>> {
        let origin = node.origin();
        let analysis = self
            .analyses
            .get(origin)
            .ok_or_else(|| DispatchError::MissingAnalysis {
                tree_id: origin.to_string(),
                category: node.category().to_string(),
                alternative: node.alternative().to_string(),
                span: node.span(),
            })?;
        let handler = analysis
            .lookup(node.category(), node.alternative())
            .ok_or_else(|| DispatchError::NoHandler {
                tree_id: origin.to_string(),
                category: node.category().to_string(),
                alternative: node.alternative().to_string(),
                span: node.span(),
            })?;

        *self
            .counters
            .borrow_mut()
            .entry(origin.to_string())
            .or_insert(0) += 1;
        if let Some(log) = self.log.borrow_mut().as_mut() {
            log.push(DispatchRecord {
                category: node.category().to_string(),
                alternative: node.alternative().to_string(),
                origin: origin.to_string(),
                handler_owner: analysis.tree_id.clone(),
            });
        }

        handler(node, ctx, self).map_err(|e| match e {
            DispatchError::Handler { error, span: None } => DispatchError::Handler {
                error,
                span: node.span(),
            },
            other => other,
        })
    }
}
