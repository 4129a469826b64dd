//! Domain types of the bricolage kernel.
//!
//! Constructs (operands and operators), structures (layout, web and control structures),
//! annotations and state, each a validated value type. Construction rejects inputs that
//! break local invariants; [`validate`] checks whole trees against a registry view and
//! reports every violation with a path and the grammar production it breaks. Nothing in
//! this crate evaluates anything.

mod error;
mod ident;

pub mod annotation;
pub mod bundle;
pub mod control;
pub mod grammar;
pub mod lookup;
pub mod operand;
pub mod resolve;
pub mod state;
pub mod structure;
pub mod validate;
pub mod value;

pub use annotation::{Annotation, AnnotationBody, AnnotationStore, ConventionalSymbol, Style, TargetKind, TargetRef};
pub use bundle::Bundle;
pub use control::{Action, Condition, Connector, ControlStructure, RewritingRule, Selector, StateRef};
pub use error::CoreError;
pub use grammar::Production;
pub use ident::{is_valid_ident, Ident};
pub use lookup::{ConstructLookup, Signature, SignatureTable, SymbolShape};
pub use operand::{Arity, Operand, OperatorConstruct, OperatorKind, Param, TypedVariable};
pub use resolve::{resolve_target, Resolution, ResolveError, ResolvedElement, TargetSpace};
pub use state::{FactPattern, State, StateDelta};
pub use structure::{Coordinates, Hyperlink, LayoutStructure, TopologicalObject, WebStructure};
pub use validate::{ValidationReport, Violation, ViolationKind};
pub use value::{MediaRef, TypeTag, Value};
