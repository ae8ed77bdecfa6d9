//! Sketch completion by example.
//!
//! Candidates are parsed into sketches, holes named by registered tags are
//! grounded, and the remaining holes are filled by enumerating every
//! combination of vocabulary constants. Completions that accept all positive
//! and reject all negative examples are kept; the smallest wins, ties broken
//! by rendered text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::Album;
use crate::dsl::{
    canonicalize, parse_with_holes, render_expr, Constant, HoleId, QueryExpr, Sketch, Slot,
};
use crate::evaluator::{CompiledQuery, EvalError};
use crate::nlbridge::{generate_candidates, CandidateError, SketchSource};

/// Raw candidates considered per query.
pub const MAX_CANDIDATES: usize = 20;
/// Completions enumerated per sketch before it is abandoned.
pub const COMPLETION_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("image `{0}` is both a positive and a negative example")]
    Overlap(String),
    #[error("example image `{0}` is not in the album")]
    UnknownImage(String),
    #[error("hole {0} has an empty domain")]
    EmptyDomain(HoleId),
    #[error("sketch source unavailable: {0}")]
    SketchSourceUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

/// User-labelled images. Disjoint by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSet {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl ExampleSet {
    pub fn new<P, N>(positive: P, negative: N) -> Result<Self, SynthesisError>
    where
        P: IntoIterator,
        P::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
    {
        let positive: BTreeSet<String> = positive.into_iter().map(Into::into).collect();
        let negative: BTreeSet<String> = negative.into_iter().map(Into::into).collect();
        if let Some(both) = positive.intersection(&negative).next() {
            return Err(SynthesisError::Overlap(both.clone()));
        }
        Ok(Self { positive, negative })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn positive(&self) -> &BTreeSet<String> {
        &self.positive
    }

    pub fn negative(&self) -> &BTreeSet<String> {
        &self.negative
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    /// Labels `image_id`, moving it out of the opposite set if present.
    pub fn label(&mut self, image_id: &str, polarity: Polarity) {
        let (to, from) = match polarity {
            Polarity::Positive => (&mut self.positive, &mut self.negative),
            Polarity::Negative => (&mut self.negative, &mut self.positive),
        };
        from.remove(image_id);
        to.insert(image_id.to_owned());
    }

    pub fn unlabel(&mut self, image_id: &str) -> bool {
        self.positive.remove(image_id) | self.negative.remove(image_id)
    }

    pub fn check_against(&self, album: &Album) -> Result<(), SynthesisError> {
        match self.iter().find(|(id, _)| !album.contains_image(id)) {
            Some((id, _)) => Err(SynthesisError::UnknownImage(id.to_owned())),
            None => Ok(()),
        }
    }

    /// Positives first, each group in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Polarity)> {
        self.positive
            .iter()
            .map(|id| (id.as_str(), Polarity::Positive))
            .chain(self.negative.iter().map(|id| (id.as_str(), Polarity::Negative)))
    }
}

/// Candidate constants per hole, each list in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HoleDomain {
    domains: BTreeMap<HoleId, Vec<Constant>>,
}

impl HoleDomain {
    pub fn for_sketch(sketch: &Sketch, album: &Album) -> Self {
        let vocab = album.vocabulary();
        Self {
            domains: sketch
                .holes()
                .iter()
                .map(|h| (h.id, vocab.candidates(h.slot)))
                .collect(),
        }
    }

    pub fn from_map(domains: BTreeMap<HoleId, Vec<Constant>>) -> Self {
        Self { domains }
    }

    pub fn get(&self, id: HoleId) -> Option<&[Constant]> {
        self.domains.get(&id).map(Vec::as_slice)
    }

    /// Size of the completion space, `None` on overflow.
    pub fn product(&self, sketch: &Sketch) -> Option<u64> {
        sketch.holes().iter().try_fold(1u64, |acc, h| {
            let n = self.get(h.id).map_or(0, <[Constant]>::len) as u64;
            acc.checked_mul(n)
        })
    }
}

/// Replaces each type hole whose source token names a registered tag with
/// that tag.
pub fn ground_tags(sketch: &Sketch, album: &Album) -> Sketch {
    let tags = album.tags();
    sketch.fill(|hole| {
        if hole.slot != Slot::TypeConst {
            return None;
        }
        let name = Constant::new(&canonicalize(&hole.origin_token))?;
        tags.get(&name).map(|_| name)
    })
}

/// Lazy odometer over the Cartesian product of the hole domains. The first
/// hole varies slowest.
#[derive(Debug, Clone)]
pub struct Completions<'a> {
    sketch: &'a Sketch,
    domains: Vec<&'a [Constant]>,
    odometer: Vec<usize>,
    done: bool,
}

impl Iterator for Completions<'_> {
    type Item = QueryExpr;

    fn next(&mut self) -> Option<QueryExpr> {
        if self.done {
            return None;
        }
        let ids: Vec<HoleId> = self.sketch.holes().iter().map(|h| h.id).collect();
        let choice = |id: HoleId| {
            let k = ids.iter().position(|h| *h == id)?;
            Some(self.domains[k][self.odometer[k]].clone())
        };
        let program = self.sketch.expr().fill_holes(&choice);

        self.done = true;
        for k in (0..self.odometer.len()).rev() {
            self.odometer[k] += 1;
            if self.odometer[k] < self.domains[k].len() {
                self.done = false;
                break;
            }
            self.odometer[k] = 0;
        }
        Some(program)
    }
}

pub fn enumerate_completions<'a>(
    sketch: &'a Sketch,
    domains: &'a HoleDomain,
) -> Result<Completions<'a>, SynthesisError> {
    let mut lists = Vec::with_capacity(sketch.holes().len());
    for hole in sketch.holes() {
        match domains.get(hole.id) {
            Some(d) if !d.is_empty() => lists.push(d),
            _ => return Err(SynthesisError::EmptyDomain(hole.id)),
        }
    }
    Ok(Completions {
        sketch,
        odometer: vec![0; lists.len()],
        domains: lists,
        done: false,
    })
}

/// The first example `query` gets wrong, positives checked first.
fn first_violation<'e>(query: &CompiledQuery<'_>, examples: &'e ExampleSet, album: &Album) -> Option<(&'e str, Polarity)> {
    examples.iter().find(|(id, polarity)| {
        let accepted = album.image(id).is_some_and(|img| query.matches(img));
        accepted != (*polarity == Polarity::Positive)
    })
}

/// True iff the program accepts every positive and rejects every negative.
pub fn consistent(program: &QueryExpr, examples: &ExampleSet, album: &Album) -> Result<bool, EvalError> {
    let query = CompiledQuery::new(program, album)?;
    Ok(first_violation(&query, examples, album).is_none())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoProgramReason {
    NoCandidates,
    /// Every candidate failed to parse or used constants the album lacks.
    Unparsable { candidates: usize, first_error: String },
    /// Completions existed but none matched the examples.
    Inconsistent {
        tried: usize,
        last_candidate: String,
        eliminated_by: String,
        polarity: Polarity,
    },
    Budget { limit: u64, required: Option<u64> },
    EmptyDomain(HoleId),
}

impl fmt::Display for NoProgramReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoProgramReason::NoCandidates => f.write_str("the sketch source returned no candidates"),
            NoProgramReason::Unparsable { candidates, first_error } => write!(
                f,
                "none of the {candidates} candidate programs could be used (first problem: {first_error}); try rephrasing the query"
            ),
            NoProgramReason::Inconsistent {
                tried,
                last_candidate,
                eliminated_by,
                polarity,
            } => write!(
                f,
                "no program among {tried} completions agrees with all examples; the last candidate `{last_candidate}` was eliminated by {polarity} example {eliminated_by}"
            ),
            NoProgramReason::Budget { limit, required } => match required {
                Some(n) => write!(f, "the sketch has {n} completions, more than the budget of {limit}"),
                None => write!(f, "the sketch has more completions than the budget of {limit}"),
            },
            NoProgramReason::EmptyDomain(id) => write!(f, "no constant can fill hole {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthesisOutcome {
    /// `ranked` holds every consistent program, best first; `ranked[0] == program`.
    Complete { program: QueryExpr, ranked: Vec<QueryExpr> },
    NeedsClarification { unknown_terms: Vec<String> },
    NoProgram { reason: NoProgramReason },
}

impl SynthesisOutcome {
    pub fn program(&self) -> Option<&QueryExpr> {
        match self {
            SynthesisOutcome::Complete { program, .. } => Some(program),
            _ => None,
        }
    }
}

fn rank_key(program: &QueryExpr) -> (usize, String) {
    (program.ast_size(), render_expr(program))
}

/// Parses, grounds and filters raw candidates. Also returns the first
/// reason a candidate was dropped.
pub fn prepare_sketches(candidates: &[String], album: &Album) -> (Vec<Sketch>, Option<String>) {
    let vocab = album.vocabulary();
    let mut seen = BTreeSet::new();
    let mut sketches = Vec::new();
    let mut first_error = None;
    for raw in candidates {
        let raw = raw.trim();
        if raw.is_empty() || !seen.insert(raw.to_owned()) {
            continue;
        }
        if seen.len() > MAX_CANDIDATES {
            break;
        }
        let sketch = match parse_with_holes(raw, vocab) {
            Ok(s) => ground_tags(&s, album),
            Err(e) => {
                tracing::debug!(candidate = raw, error = %e.reason, "discarding unparsable candidate");
                first_error.get_or_insert_with(|| format!("`{raw}`: {}", e.reason));
                continue;
            }
        };
        if let Some((slot, c)) = sketch
            .expr()
            .constants()
            .into_iter()
            .find(|(slot, c)| !vocab.contains(*slot, c))
        {
            first_error.get_or_insert_with(|| format!("`{raw}`: unknown {} `{c}`", slot.name()));
            continue;
        }
        if !sketches.contains(&sketch) {
            sketches.push(sketch);
        }
    }
    (sketches, first_error)
}

/// Steps after candidate generation: clarification check, enumeration,
/// consistency filtering and ranking.
pub fn complete_sketches(sketches: &[Sketch], examples: &ExampleSet, album: &Album) -> SynthesisOutcome {
    if examples.is_empty() {
        let mut terms: Vec<String> = Vec::new();
        for hole in sketches.iter().flat_map(Sketch::holes) {
            let term = canonicalize(&hole.origin_token);
            if !terms.contains(&term) {
                terms.push(term);
            }
        }
        if !terms.is_empty() {
            return SynthesisOutcome::NeedsClarification { unknown_terms: terms };
        }
    }

    let mut consistent_set: Vec<QueryExpr> = Vec::new();
    let mut tried = 0usize;
    let mut last_rejection: Option<(String, String, Polarity)> = None;
    let mut over_budget: Option<NoProgramReason> = None;
    for sketch in sketches {
        let domains = HoleDomain::for_sketch(sketch, album);
        let size = domains.product(sketch);
        if size.is_none_or(|n| n > COMPLETION_BUDGET) {
            tracing::warn!(sketch = %sketch, "completion budget exceeded");
            over_budget.get_or_insert(NoProgramReason::Budget {
                limit: COMPLETION_BUDGET,
                required: size,
            });
            continue;
        }
        let completions: Vec<QueryExpr> = match enumerate_completions(sketch, &domains) {
            Ok(it) => it.collect(),
            Err(SynthesisError::EmptyDomain(id)) => {
                over_budget.get_or_insert(NoProgramReason::EmptyDomain(id));
                continue;
            }
            Err(e) => unreachable!("enumeration only fails on empty domains: {e}"),
        };
        tried += completions.len();
        let verdicts: Vec<Option<(&str, Polarity)>> = completions
            .par_iter()
            .map(|program| match CompiledQuery::new(program, album) {
                Ok(q) => first_violation(&q, examples, album),
                // Domains come from the vocabulary, so this is unreachable in
                // practice; treat as a rejection by the first example.
                Err(_) => examples.iter().next().or(Some(("", Polarity::Positive))),
            })
            .collect();
        for (program, verdict) in completions.into_iter().zip(verdicts) {
            match verdict {
                None => consistent_set.push(program),
                Some((id, polarity)) => last_rejection = Some((render_expr(&program), id.to_owned(), polarity)),
            }
        }
    }

    if consistent_set.is_empty() {
        let reason = match (last_rejection, over_budget) {
            (Some((last_candidate, eliminated_by, polarity)), _) => NoProgramReason::Inconsistent {
                tried,
                last_candidate,
                eliminated_by,
                polarity,
            },
            (None, Some(reason)) => reason,
            (None, None) => NoProgramReason::NoCandidates,
        };
        return SynthesisOutcome::NoProgram { reason };
    }

    let mut keyed: Vec<((usize, String), QueryExpr)> =
        consistent_set.into_iter().map(|p| (rank_key(&p), p)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    let ranked: Vec<QueryExpr> = keyed.into_iter().map(|(_, p)| p).collect();
    let program = ranked[0].clone();
    assert!(
        consistent(&program, examples, album).unwrap_or(false),
        "synthesized program `{program}` violates its examples"
    );
    SynthesisOutcome::Complete { program, ranked }
}

/// Synthesizes from already generated raw candidates.
pub fn synthesize_from_candidates(candidates: &[String], examples: &ExampleSet, album: &Album) -> SynthesisOutcome {
    if candidates.iter().all(|c| c.trim().is_empty()) {
        return SynthesisOutcome::NoProgram {
            reason: NoProgramReason::NoCandidates,
        };
    }
    let (sketches, first_error) = prepare_sketches(candidates, album);
    if sketches.is_empty() {
        return SynthesisOutcome::NoProgram {
            reason: NoProgramReason::Unparsable {
                candidates: candidates.len().min(MAX_CANDIDATES),
                first_error: first_error.unwrap_or_default(),
            },
        };
    }
    complete_sketches(&sketches, examples, album)
}

/// The full pipeline from natural language to an outcome.
pub fn synthesize(
    nl_query: &str,
    examples: &ExampleSet,
    album: &Album,
    source: &SketchSource,
) -> Result<SynthesisOutcome, SynthesisError> {
    examples.check_against(album)?;
    let candidates = match generate_candidates(nl_query, source) {
        Ok(c) => c,
        Err(CandidateError::Endpoint(e)) if source.fallback_on_error => {
            tracing::warn!(error = %e, "sketch source failed, using the offline translator");
            crate::nlbridge::fallback_candidates(nl_query)
        }
        Err(e) => return Err(SynthesisError::SketchSourceUnavailable(e.to_string())),
    };
    Ok(synthesize_from_candidates(&candidates, examples, album))
}
