//! Append-only per-session event log, one JSON object per line.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;

use photoscout::annotations::TagTarget;
use photoscout::synthesis::Polarity;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionCreated { album_id: String },
    QuerySubmitted { query: String },
    ExampleAdded { image_id: String, polarity: Polarity },
    ExampleRemoved { image_id: String },
    TagAdded { name: String, target: TagTarget },
    SearchFinished { status: String, results: usize },
    ImageSaved { image_id: String },
    ImageUnsaved { image_id: String },
    Exported { destination: String, images: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    /// RFC 3339, UTC.
    pub at: String,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Default)]
pub struct EventLog {
    file: Option<PathBuf>,
    events: Vec<LoggedEvent>,
}

impl EventLog {
    pub fn new(file: Option<PathBuf>) -> Self {
        Self { file, events: Vec::new() }
    }

    pub fn events(&self) -> &[LoggedEvent] {
        &self.events
    }

    /// Records `event` in memory and, when backed by a file, on disk. A
    /// failed disk write is reported but the in-memory record stays.
    pub fn append(&mut self, event: SessionEvent) {
        let logged = LoggedEvent {
            seq: self.events.len() as u64,
            at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            event,
        };
        if let Some(path) = &self.file {
            let line = serde_json::to_string(&logged).expect("events serialize");
            let written = path
                .parent()
                .map_or(Ok(()), fs::create_dir_all)
                .and_then(|_| OpenOptions::new().create(true).append(true).open(path))
                .and_then(|mut f| writeln!(f, "{line}"));
            if let Err(e) = written {
                tracing::warn!(path = %path.display(), error = %e, "cannot append session event");
            }
        }
        self.events.push(logged);
    }
}

/// Reads a log written by [`EventLog::append`].
pub fn read_log(text: &str) -> Result<Vec<LoggedEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appends_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sessions/s1.jsonl");
        let mut log = EventLog::new(Some(path.clone()));
        log.append(SessionEvent::QuerySubmitted { query: "a dog".into() });
        log.append(SessionEvent::ExampleAdded {
            image_id: "i1".into(),
            polarity: Polarity::Negative,
        });
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(r#""event":"example_added""#));
        assert!(text.contains(r#""polarity":"negative""#));
        assert_eq!(read_log(&text).unwrap(), log.events());
    }
}
