//! Annotated-utterance generation toolkit for intent classification and slot
//! tagging.
//!
//! The crate covers the data side of instruction-prompted data augmentation:
//! a bracket-annotation data model ([`corpus`]), the prompt grammar and
//! training-pair construction ([`prompt`]), a pluggable generation backend
//! ([`generation`]), reason-coded output filtering ([`filters`]), few-shot
//! experiment protocols ([`augment`]), evaluation ([`metrics`]) and an
//! end-to-end staged runner ([`pipeline`]).

pub mod augment;
pub mod corpus;
pub mod filters;
pub mod generation;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod rng;
