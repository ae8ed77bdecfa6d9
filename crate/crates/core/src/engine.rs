//! One search request end to end, with the response shape shared by the
//! command line and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::annotations::Album;
use crate::evaluator::search;
use crate::nlbridge::{explain_with, SketchSource};
use crate::synthesis::{synthesize, ExampleSet, SynthesisError, SynthesisOutcome};

/// Payload format version.
pub const API_VERSION: u32 = 1;

/// `{"v": 1, ...body}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub v: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(body: T) -> Self {
        Self { v: API_VERSION, body }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchResponse {
    Complete {
        program: String,
        explanation: String,
        results: Vec<String>,
    },
    NeedsClarification {
        unknown_terms: Vec<String>,
        message: String,
    },
    NoProgram {
        diagnostic: String,
    },
}

impl SearchResponse {
    pub fn status(&self) -> &'static str {
        match self {
            SearchResponse::Complete { .. } => "complete",
            SearchResponse::NeedsClarification { .. } => "needs_clarification",
            SearchResponse::NoProgram { .. } => "no_program",
        }
    }

    pub fn results(&self) -> &[String] {
        match self {
            SearchResponse::Complete { results, .. } => results,
            _ => &[],
        }
    }
}

fn quoted(term: &str) -> String {
    let mut chars = term.chars();
    let first: String = chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default();
    format!("'{first}'")
}

/// "I don't know the terms 'Alice' and 'Holding'. Can you ...?"
pub fn clarification_message(terms: &[String]) -> String {
    let listed = match terms {
        [] => String::new(),
        [only] => format!("the term {}", quoted(only)),
        [init @ .., last] => format!(
            "the terms {} and {}",
            init.iter().map(|t| quoted(t)).collect::<Vec<_>>().join(", "),
            quoted(last)
        ),
    };
    format!(
        "I don't know {listed}. Can you provide a few positive and negative examples and/or tags to show me what you mean?"
    )
}

/// Turns an outcome into a response, running the program over the album.
pub fn respond(outcome: &SynthesisOutcome, album: &Album, source: &SketchSource) -> SearchResponse {
    match outcome {
        SynthesisOutcome::Complete { program, .. } => SearchResponse::Complete {
            program: program.to_string(),
            explanation: explain_with(program, album, source),
            results: search(program, album).expect("synthesized programs use album constants"),
        },
        SynthesisOutcome::NeedsClarification { unknown_terms } => SearchResponse::NeedsClarification {
            message: clarification_message(unknown_terms),
            unknown_terms: unknown_terms.clone(),
        },
        SynthesisOutcome::NoProgram { reason } => SearchResponse::NoProgram {
            diagnostic: reason.to_string(),
        },
    }
}

/// Synthesizes a program for `nl_query` and runs it.
pub fn run_search(
    nl_query: &str,
    examples: &ExampleSet,
    album: &Album,
    source: &SketchSource,
) -> Result<(SynthesisOutcome, SearchResponse), SynthesisError> {
    let outcome = synthesize(nl_query, examples, album, source)?;
    let response = respond(&outcome, album, source);
    Ok((outcome, response))
}
