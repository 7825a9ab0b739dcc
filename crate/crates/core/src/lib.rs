//! Population protocols in several communication models: multiset
//! configurations, protocol construction and simulation transforms,
//! exhaustive stable-computation checking, and semilinear predicates.

pub mod cli;
pub mod format;
pub mod library;
pub mod model;
pub mod multiset;
pub mod semilinear;
pub mod transforms;
pub mod verifier;

pub use format::{emit_protocol, parse_protocol, ParseError};
pub use model::{
    compile_rules, validate_model, Model, ModelError, ModelKind, Output, ProtocolSpec, Rule, RuleSet,
};
pub use multiset::{Alphabet, Element, Multiset, MultisetError};
pub use semilinear::{parse_predicate, PredicateExpr, Profile};
