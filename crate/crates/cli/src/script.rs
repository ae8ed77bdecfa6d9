//! Session scripts: one step per line, run against an in-process service.
//!
//! ```text
//! # comments and blank lines are ignored
//! query Alice next to Bob holding flowers
//! expect_status needs_clarification
//! expect_terms alice bob holding
//! tag alice=c01
//! pos wed_0001
//! neg wed_0002
//! expect_status complete
//! expect_contains wed_0001
//! expect_absent wed_0002
//! expect_results truth.txt
//! ```
//!
//! `query`, `tag`, `pos` and `neg` change the session; the next `expect_*`
//! step searches first if anything changed since the last search.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use photoscout_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::commands::{sketch_source, tag_flag};
use crate::failure::{Failure, Outcome};

const STATUSES: [&str; 3] = ["complete", "needs_clarification", "no_program"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Query(String),
    Tag { name: String, cluster: String },
    Pos(String),
    Neg(String),
    ExpectStatus(String),
    ExpectTerms(Vec<String>),
    ExpectContains(String),
    ExpectAbsent(String),
    /// Exact result set, read from a file of ids.
    ExpectResults(Vec<String>),
}

impl Step {
    fn mutates(&self) -> bool {
        matches!(self, Step::Query(_) | Step::Tag { .. } | Step::Pos(_) | Step::Neg(_))
    }

    fn image_ids(&self) -> Vec<&str> {
        match self {
            Step::Pos(id) | Step::Neg(id) | Step::ExpectContains(id) | Step::ExpectAbsent(id) => vec![id],
            Step::ExpectResults(ids) => ids.iter().map(String::as_str).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub text: String,
    pub step: Step,
}

fn single(line: usize, keyword: &str, rest: &str) -> Outcome<String> {
    let mut words = rest.split_whitespace();
    match (words.next(), words.next()) {
        (Some(word), None) => Ok(word.to_owned()),
        _ => Err(Failure::input(format!("line {line}: `{keyword}` takes exactly one argument"))),
    }
}

/// Parses a script; `base` resolves `expect_results` paths.
pub fn parse_script(text: &str, base: &Path) -> Outcome<Vec<ScriptLine>> {
    let mut steps = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (keyword, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let rest = rest.trim();
        let step = match keyword {
            "query" if !rest.is_empty() => Step::Query(rest.to_owned()),
            "query" => return Err(Failure::input(format!("line {line}: `query` needs text"))),
            "tag" => {
                let (name, cluster) =
                    tag_flag(rest).map_err(|e| Failure::input(format!("line {line}: {e}")))?;
                Step::Tag {
                    name: name.to_owned(),
                    cluster: cluster.to_owned(),
                }
            }
            "pos" => Step::Pos(single(line, keyword, rest)?),
            "neg" => Step::Neg(single(line, keyword, rest)?),
            "expect_status" => {
                let status = single(line, keyword, rest)?;
                if !STATUSES.contains(&status.as_str()) {
                    return Err(Failure::input(format!(
                        "line {line}: status must be one of {}",
                        STATUSES.join(", ")
                    )));
                }
                Step::ExpectStatus(status)
            }
            "expect_terms" => Step::ExpectTerms(rest.split_whitespace().map(str::to_lowercase).collect()),
            "expect_contains" => Step::ExpectContains(single(line, keyword, rest)?),
            "expect_absent" => Step::ExpectAbsent(single(line, keyword, rest)?),
            "expect_results" => {
                let path = base.join(single(line, keyword, rest)?);
                let ids = fs::read_to_string(&path)
                    .map_err(|e| Failure::input(format!("line {line}: cannot read {}: {e}", path.display())))?;
                Step::ExpectResults(ids.split_whitespace().map(str::to_owned).collect())
            }
            other => return Err(Failure::input(format!("line {line}: unknown step `{other}`"))),
        };
        steps.push(ScriptLine {
            line,
            text: trimmed.to_owned(),
            step,
        });
    }
    Ok(steps)
}

/// Drives the router without a socket.
struct Client {
    runtime: tokio::runtime::Runtime,
    router: Router,
}

impl Client {
    fn call(&self, method: Method, uri: &str, body: Option<Value>) -> Outcome<Value> {
        let request = Request::builder().method(method).uri(uri);
        let request = match body {
            Some(b) => request
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => request.body(Body::empty()),
        }
        .expect("well-formed request");
        let (status, bytes) = self.runtime.block_on(async {
            let response = self.router.clone().oneshot(request).await.expect("router is infallible");
            let status = response.status();
            (status, to_bytes(response.into_body(), usize::MAX).await)
        });
        let bytes = bytes.map_err(|e| Failure::environment(format!("{uri}: {e}")))?;
        let value: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        if status.is_success() {
            return Ok(value);
        }
        let message = format!("{uri}: {status}: {}", value["error"].as_str().unwrap_or("no detail"));
        Err(if status == StatusCode::BAD_GATEWAY || status.is_server_error() {
            Failure::environment(message)
        } else {
            Failure::input(message)
        })
    }

    fn post(&self, uri: &str, body: Value) -> Outcome<Value> {
        self.call(Method::POST, uri, Some(body))
    }
}

/// Pending session edits plus the last response.
#[derive(Default)]
struct Session {
    query: Option<String>,
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
    stale: bool,
    last: Option<Value>,
}

fn strings(value: &Value) -> Vec<String> {
    value
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_owned)).collect())
        .unwrap_or_default()
}

/// Checks one expectation against the last response.
fn check(step: &Step, response: &Value) -> Result<(), String> {
    let status = response["status"].as_str().unwrap_or("");
    let results = strings(&response["results"]);
    match step {
        Step::ExpectStatus(want) if status == want => Ok(()),
        Step::ExpectStatus(want) => Err(format!("expected status {want}, got {status}")),
        Step::ExpectTerms(want) => {
            let got = strings(&response["unknown_terms"]);
            if &got == want {
                Ok(())
            } else {
                Err(format!("expected unknown terms {want:?}, got {got:?}"))
            }
        }
        Step::ExpectContains(id) if results.contains(id) => Ok(()),
        Step::ExpectContains(id) => Err(format!("`{id}` is not among the {} results", results.len())),
        Step::ExpectAbsent(id) if results.contains(id) => Err(format!("`{id}` is among the results")),
        Step::ExpectAbsent(_) => Ok(()),
        Step::ExpectResults(want) => {
            let want: BTreeSet<&String> = want.iter().collect();
            let got: BTreeSet<&String> = results.iter().collect();
            if want == got {
                return Ok(());
            }
            let missing: Vec<_> = want.difference(&got).collect();
            let extra: Vec<_> = got.difference(&want).collect();
            Err(format!("result set differs: missing {missing:?}, unexpected {extra:?}"))
        }
        _ => unreachable!("only expectations are checked"),
    }
}

pub fn replay(mut config: ServiceConfig, album_id: &str, script: &Path, source: Option<&str>) -> Outcome {
    let text = fs::read_to_string(script)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", script.display())))?;
    let steps = parse_script(&text, script.parent().unwrap_or(Path::new("")))?;

    config.state_dir = None;
    let source = sketch_source(&config, Some(source.unwrap_or("fallback")))?;
    let mut state = AppState::new(config);
    state.source = source;
    let client = Client {
        runtime: tokio::runtime::Runtime::new().map_err(|e| Failure::environment(e.to_string()))?,
        router: router(Arc::new(state)),
    };

    client.post("/albums", json!({"v": 1, "album_id": album_id}))?;
    let listing = client.call(Method::GET, &format!("/albums/{album_id}/images"), None)?;
    let known: BTreeSet<String> = listing["images"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|img| img["image_id"].as_str().map(str::to_owned))
        .collect();
    for s in &steps {
        if let Some(id) = s.step.image_ids().into_iter().find(|id| !known.contains(*id)) {
            return Err(Failure::input(format!("line {}: no image `{id}` in album `{album_id}`", s.line)));
        }
    }

    let created = client.post("/sessions", json!({"v": 1, "album_id": album_id}))?;
    let session_id = created["session_id"].as_str().expect("sessions have ids").to_owned();
    let search_uri = format!("/sessions/{session_id}/search");
    let tag_uri = format!("/albums/{album_id}/tags");

    let mut session = Session::default();
    for (k, s) in steps.iter().enumerate() {
        let number = k + 1;
        if s.step.mutates() {
            session.stale = true;
        }
        match &s.step {
            Step::Query(q) => session.query = Some(q.clone()),
            Step::Tag { name, cluster } => {
                client.post(
                    &tag_uri,
                    json!({"v": 1, "name": name, "face_cluster": cluster, "session_id": session_id}),
                )?;
            }
            Step::Pos(id) => {
                session.negative.remove(id);
                session.positive.insert(id.clone());
            }
            Step::Neg(id) => {
                session.positive.remove(id);
                session.negative.insert(id.clone());
            }
            expectation => {
                if session.stale || session.last.is_none() {
                    let Some(query) = &session.query else {
                        return Err(Failure::input(format!("line {}: expectation before any query", s.line)));
                    };
                    let body = json!({
                        "v": 1,
                        "query": query,
                        "positive": session.positive,
                        "negative": session.negative,
                    });
                    session.last = Some(client.post(&search_uri, body)?);
                    session.stale = false;
                }
                let response = session.last.as_ref().expect("searched above");
                if let Err(reason) = check(expectation, response) {
                    println!("FAIL step {number} (line {}): {}: {reason}", s.line, s.text);
                    return Err(Failure::failed(format!("step {number} failed")));
                }
            }
        }
        println!("ok   step {number}: {}", s.text);
    }
    println!("PASS {} ({} steps)", script.display(), steps.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_step_kind() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("truth.txt"), "a\nb\n").unwrap();
        let text = "# c\n\nquery Alice  holding flowers\ntag alice = c01\npos a\nneg b\n\
                    expect_status complete\nexpect_terms Alice holding\nexpect_contains a\nexpect_absent b\n\
                    expect_results truth.txt\n";
        let steps: Vec<Step> = parse_script(text, dir.path()).unwrap().into_iter().map(|s| s.step).collect();
        assert_eq!(
            steps,
            [
                Step::Query("Alice  holding flowers".into()),
                Step::Tag {
                    name: "alice".into(),
                    cluster: "c01".into()
                },
                Step::Pos("a".into()),
                Step::Neg("b".into()),
                Step::ExpectStatus("complete".into()),
                Step::ExpectTerms(vec!["alice".into(), "holding".into()]),
                Step::ExpectContains("a".into()),
                Step::ExpectAbsent("b".into()),
                Step::ExpectResults(vec!["a".into(), "b".into()]),
            ]
        );
    }

    #[test]
    fn rejects_malformed_lines_with_their_number() {
        let base = Path::new(".");
        for (text, line) in [
            ("query q\nfrobnicate", 2),
            ("pos", 1),
            ("pos a b", 1),
            ("expect_status done", 1),
            ("tag alice", 1),
            ("query", 1),
        ] {
            let err = parse_script(text, base).unwrap_err();
            assert_eq!(err.code, crate::failure::Code::Input);
            assert!(err.message.starts_with(&format!("line {line}:")), "{}", err.message);
        }
        assert!(parse_script("", base).unwrap().is_empty());
    }

    #[test]
    fn expectations() {
        let r = json!({"status": "complete", "results": ["a", "b"]});
        assert!(check(&Step::ExpectStatus("complete".into()), &r).is_ok());
        assert!(check(&Step::ExpectStatus("no_program".into()), &r).is_err());
        assert!(check(&Step::ExpectContains("a".into()), &r).is_ok());
        assert!(check(&Step::ExpectAbsent("a".into()), &r).is_err());
        assert!(check(&Step::ExpectResults(vec!["b".into(), "a".into()]), &r).is_ok());
        assert!(check(&Step::ExpectResults(vec!["a".into()]), &r).is_err());
        let c = json!({"status": "needs_clarification", "unknown_terms": ["alice"]});
        assert!(check(&Step::ExpectTerms(vec!["alice".into()]), &c).is_ok());
        assert!(check(&Step::ExpectContains("a".into()), &c).is_err());
    }
}
