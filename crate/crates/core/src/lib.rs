//! Extensible syntax trees with extension-aware analyses, plus the language
//! services layered on them: a small specification language (Base-L) with an
//! interpreter and proof-obligation generator, a process extension (Proc-L),
//! combinatorial testing, a code-generation IR and a co-simulation master.

pub mod astspec;
pub mod baselang;
pub mod cosim;
pub mod ctengine;
pub mod extlang;
pub mod irgen;
pub mod span;
pub mod treekit;

pub use astspec::{Schema, SpecError};
pub use baselang::{BaseModule, Obligation, Type, Value};
pub use cosim::{Scenario, Timeline};
pub use ctengine::{TestCase, TraceExpr, Verdict};
pub use extlang::ProcModule;
pub use irgen::IrModule;
pub use span::{Pos, Span};
pub use treekit::{make_node, Analysis, Diagnostic, DispatchError, Dispatcher, FieldValue, Node};
