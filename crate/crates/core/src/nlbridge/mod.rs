//! Natural language in and out: candidate programs from a query, and
//! English explanations of programs.

mod corpus;
mod explain;
mod fallback;
mod llm;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::Album;
use crate::dsl::QueryExpr;

pub use corpus::{block, PromptCorpus, PROMPT_PAIRS};
pub use explain::{explain, explain_for, explain_named};
pub use fallback::translate as fallback_candidates;
pub use llm::{extract_program, split_samples, EndpointError, LlmConfig, DEFAULT_KEY_ENV};

pub const DEFAULT_SAMPLE_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SourceMode {
    Llm(LlmConfig),
    Fallback,
    /// Newline-separated recorded model outputs.
    Replay { path: PathBuf },
}

/// Where candidate programs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchSource {
    pub mode: SourceMode,
    /// At least 1.
    pub sample_count: usize,
    /// Use the offline translator when the endpoint fails.
    pub fallback_on_error: bool,
}

impl SketchSource {
    pub fn fallback() -> Self {
        Self {
            mode: SourceMode::Fallback,
            sample_count: DEFAULT_SAMPLE_COUNT,
            fallback_on_error: true,
        }
    }

    pub fn replay(path: impl Into<PathBuf>) -> Self {
        Self {
            mode: SourceMode::Replay { path: path.into() },
            ..Self::fallback()
        }
    }

    pub fn llm(config: LlmConfig) -> Self {
        Self {
            mode: SourceMode::Llm(config),
            ..Self::fallback()
        }
    }
}

impl Default for SketchSource {
    fn default() -> Self {
        Self::fallback()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CandidateError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("cannot read replay file {path}: {detail}")]
    Replay { path: PathBuf, detail: String },
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Non-empty lines of a replay file, verbatim.
pub fn read_replay(path: &Path) -> Result<Vec<String>, CandidateError> {
    let text = std::fs::read_to_string(path).map_err(|e| CandidateError::Replay {
        path: path.to_owned(),
        detail: e.to_string(),
    })?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

/// Raw candidate program texts for `nl_query`.
pub fn generate_candidates(nl_query: &str, source: &SketchSource) -> Result<Vec<String>, CandidateError> {
    if source.sample_count == 0 {
        return Err(CandidateError::NoSamples);
    }
    match &source.mode {
        SourceMode::Fallback => Ok(fallback_candidates(nl_query)),
        SourceMode::Replay { path } => read_replay(path),
        SourceMode::Llm(config) => {
            let prompt = PromptCorpus::default().build_prompt(nl_query);
            let raw = config.complete(&prompt, source.sample_count)?;
            Ok(raw.iter().map(|r| extract_program(r)).collect())
        }
    }
}

/// Model-written explanation when an endpoint is configured, the template
/// otherwise or on any failure.
pub fn explain_with(program: &QueryExpr, album: &Album, source: &SketchSource) -> String {
    let template = explain_for(program, album);
    let SourceMode::Llm(config) = &source.mode else {
        return template;
    };
    let prompt = PromptCorpus::default().build_explain_prompt(&program.to_string());
    match config.complete(&prompt, 1) {
        Ok(texts) => texts
            .iter()
            .map(|t| t.trim())
            .find(|t| !t.is_empty())
            .map_or(template, str::to_owned),
        Err(e) => {
            tracing::warn!(error = %e, "explanation endpoint failed, using the template");
            template
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{BBox, DetectedObject, ImageAnnotation};
    use crate::dsl::{parse, parse_with_holes, KnownVocabulary};
    use crate::synthesis::{synthesize, ExampleSet, SynthesisError, SynthesisOutcome};
    use std::time::Duration;

    #[test]
    fn corpus_programs_parse_without_holes() {
        for (_, dsl) in PROMPT_PAIRS {
            let program = parse(dsl).unwrap();
            assert!(program.is_hole_free());
            program.check_closed().unwrap();
        }
    }

    #[test]
    fn fallback_source_translates() {
        assert_eq!(
            generate_candidates("there is a tree in the image", &SketchSource::fallback()).unwrap(),
            ["exists x. HasType(x, Tree)"]
        );
    }

    #[test]
    fn replay_returns_file_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.txt");
        std::fs::write(&path, "exists x. HasType(x, Dog)\n\nnot a program\n").unwrap();
        assert_eq!(
            generate_candidates("ignored", &SketchSource::replay(&path)).unwrap(),
            ["exists x. HasType(x, Dog)", "not a program"]
        );
        let missing = SketchSource::replay(dir.path().join("missing.txt"));
        assert!(matches!(generate_candidates("q", &missing), Err(CandidateError::Replay { .. })));
        let mut zero = SketchSource::fallback();
        zero.sample_count = 0;
        assert_eq!(generate_candidates("q", &zero), Err(CandidateError::NoSamples));
    }

    #[test]
    fn llm_source_sends_the_few_shot_prompt() {
        let (url, seen) = llm::tests::mock_endpoint(
            200,
            llm::tests::choices(&["Output: exists x. HasType(x, Dog)"]),
            Duration::ZERO,
        );
        let mut source = SketchSource::llm(llm::tests::config(url, "PHOTOSCOUT_TEST_KEY_GEN"));
        source.sample_count = 3;
        let out = generate_candidates("a dog", &source).unwrap();
        assert_eq!(out, vec!["exists x. HasType(x, Dog)"; 3]);
        let bodies = seen.lock().unwrap();
        let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        let prompt = body["messages"][0]["content"].as_str().unwrap();
        assert_eq!(prompt, PromptCorpus::default().build_prompt("a dog"));
        for (nl, dsl) in PROMPT_PAIRS {
            assert!(prompt.contains(&block(nl, dsl)));
        }
    }

    fn dog_album() -> Album {
        let dog = DetectedObject::thing("o1", "dog", 0.9, BBox::new(0.1, 0.1, 0.2, 0.2).unwrap());
        Album::new("d", vec![ImageAnnotation::new("i1", vec![dog]), ImageAnnotation::new("i2", vec![])]).unwrap()
    }

    #[test]
    fn endpoint_failure_degrades_to_fallback_or_errors() {
        let (url, _) = llm::tests::mock_endpoint(500, "{}".into(), Duration::ZERO);
        let mut source = SketchSource::llm(llm::tests::config(url, "PHOTOSCOUT_TEST_KEY_DEGRADE"));
        let album = dog_album();
        let out = synthesize("there is a dog", &ExampleSet::empty(), &album, &source).unwrap();
        let SynthesisOutcome::Complete { program, .. } = out else {
            panic!("{out:?}")
        };
        assert_eq!(program.to_string(), "exists x. HasType(x, Dog)");

        source.fallback_on_error = false;
        assert!(matches!(
            synthesize("there is a dog", &ExampleSet::empty(), &album, &source),
            Err(SynthesisError::SketchSourceUnavailable(_))
        ));
    }

    #[test]
    fn explanation_prefers_the_endpoint_and_falls_back() {
        let album = dog_album();
        let program = parse("exists x. HasType(x, Dog)").unwrap();
        assert_eq!(
            explain_with(&program, &album, &SketchSource::fallback()),
            "Images where there is a dog x."
        );
        let (url, _) = llm::tests::mock_endpoint(200, llm::tests::choices(&["Photos with a dog."]), Duration::ZERO);
        let source = SketchSource::llm(llm::tests::config(url, "PHOTOSCOUT_TEST_KEY_EXPLAIN"));
        assert_eq!(explain_with(&program, &album, &source), "Photos with a dog.");
        let (url, _) = llm::tests::mock_endpoint(404, "{}".into(), Duration::ZERO);
        let source = SketchSource::llm(llm::tests::config(url, "PHOTOSCOUT_TEST_KEY_EXPLAIN_404"));
        assert_eq!(explain_with(&program, &album, &source), "Images where there is a dog x.");
    }

    #[test]
    fn fallback_output_survives_hole_parsing() {
        let vocab = KnownVocabulary::builtin();
        for q in ["Alice next to Bob holding flowers", "no dogs", "a cat but not a dog", "x left of y"] {
            for c in fallback_candidates(q) {
                parse_with_holes(&c, &vocab).unwrap();
            }
        }
    }
}
