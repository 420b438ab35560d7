//! Text formats: spec files describing a tree, spins, a family and named
//! covers, and event expressions denoting cylinder sets.

mod document;
mod error;
mod event;
mod lexer;

pub use document::{
    parse_spec, CoverEntry, CoverSpec, FamilyForm, FamilySpec, Model, SpecDocument, SpinSpec,
};
pub use error::ParseError;
pub use event::{parse_event, parse_event_for, EventExpr, MAX_RANGE};
