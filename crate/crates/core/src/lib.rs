//! Structured image search by program synthesis.
//!
//! A natural-language query is turned into candidate programs of a small
//! first-order query language; constants the system cannot ground become
//! holes that are filled from user tags and by enumerating completions
//! consistent with positive and negative example images. The chosen program
//! is then run over every image of an album of precomputed detections.

pub mod annotations;
pub mod dsl;
pub mod engine;
pub mod evaluator;
pub mod fixtures;
pub mod nlbridge;
pub mod synthesis;
