//! Shared service state: published album snapshots and per-session state.
//!
//! Albums are immutable once published; tagging builds a new snapshot and
//! swaps it in under the write lock, so readers never see a half-applied
//! tag. Each session sits behind its own async mutex, which makes its
//! handlers run one at a time.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use photoscout::annotations::{load_album, Album, TagTarget};
use photoscout::engine::SearchResponse;
use photoscout::nlbridge::SketchSource;
use photoscout::synthesis::{ExampleSet, SynthesisOutcome};
use tokio::sync::Mutex;

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::events::{EventLog, SessionEvent};

#[derive(Debug, Clone)]
pub struct AlbumEntry {
    pub album: Arc<Album>,
    /// Directory the annotations were read from; thumbnails live here too.
    pub dir: PathBuf,
}

#[derive(Debug)]
pub struct Session {
    pub session_id: String,
    pub album_id: String,
    pub query: Option<String>,
    pub examples: ExampleSet,
    pub last_outcome: Option<SynthesisOutcome>,
    pub last_response: Option<SearchResponse>,
    /// Always a subset of the album's image ids.
    pub saved: BTreeSet<String>,
    pub log: EventLog,
}

impl Session {
    pub fn program(&self) -> Option<String> {
        self.last_outcome.as_ref().and_then(|o| o.program()).map(ToString::to_string)
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub source: SketchSource,
    albums: RwLock<BTreeMap<String, AlbumEntry>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

/// Album ids become directory names and URL segments.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// A relative path that stays below its base.
fn contained(path: &str) -> Option<&Path> {
    let p = Path::new(path);
    p.components()
        .all(|c| matches!(c, Component::Normal(_)))
        .then_some(p)
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            source: config.source(),
            config,
            albums: RwLock::default(),
            sessions: RwLock::default(),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn album(&self, album_id: &str) -> Result<AlbumEntry, ApiError> {
        self.albums
            .read()
            .expect("album lock")
            .get(album_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown album `{album_id}`")))
    }

    pub fn album_ids(&self) -> Vec<String> {
        self.albums.read().expect("album lock").keys().cloned().collect()
    }

    /// Publishes an already loaded album.
    pub fn insert_album(&self, mut album: Album, dir: PathBuf) -> Result<Arc<Album>, ApiError> {
        album.set_confidence_threshold(self.config.confidence_threshold)?;
        album.set_spatial(self.config.spatial);
        let id = album.album_id().to_owned();
        let mut albums = self.albums.write().expect("album lock");
        if albums.contains_key(&id) {
            return Err(ApiError::conflict(format!("album `{id}` already exists")));
        }
        let album = Arc::new(album);
        albums.insert(
            id,
            AlbumEntry {
                album: Arc::clone(&album),
                dir,
            },
        );
        Ok(album)
    }

    /// Reads `<album_root>/<path>` as album `album_id`.
    pub fn load_album(&self, album_id: &str, path: Option<&str>) -> Result<Arc<Album>, ApiError> {
        if !valid_id(album_id) {
            return Err(ApiError::unprocessable(format!(
                "album id `{album_id}` must be letters, digits, `_` or `-`"
            )));
        }
        if self.albums.read().expect("album lock").contains_key(album_id) {
            return Err(ApiError::conflict(format!("album `{album_id}` already exists")));
        }
        let rel = contained(path.unwrap_or(album_id))
            .ok_or_else(|| ApiError::unprocessable("album path must be relative and stay inside the album root"))?;
        let dir = self.config.album_root.join(rel);
        let album = load_album(&dir, album_id)?;
        self.insert_album(album, dir)
    }

    /// Loads every album directory under the root, skipping invalid ones.
    pub fn load_all(&self) -> Vec<String> {
        let Ok(entries) = std::fs::read_dir(&self.config.album_root) else {
            return Vec::new();
        };
        let mut names: Vec<String> = entries
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| valid_id(n))
            .collect();
        names.sort();
        names
            .into_iter()
            .filter(|name| match self.load_album(name, None) {
                Ok(_) => true,
                Err(e) => {
                    tracing::warn!(album = %name, error = %e.message, "skipping album");
                    false
                }
            })
            .collect()
    }

    /// Applies a tag to a fresh copy of the album and publishes it.
    /// Returns whether the name already existed.
    pub fn tag(&self, album_id: &str, name: &str, target: TagTarget) -> Result<bool, ApiError> {
        let mut albums = self.albums.write().expect("album lock");
        let entry = albums
            .get_mut(album_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown album `{album_id}`")))?;
        let mut next = (*entry.album).clone();
        let replaced = photoscout::dsl::Constant::new(name).is_some_and(|c| next.tags().get(&c).is_some());
        next.register_tag(name, target)?;
        entry.album = Arc::new(next);
        Ok(replaced)
    }

    pub fn create_session(&self, album_id: &str) -> Result<String, ApiError> {
        self.album(album_id)?;
        let log_dir = self.config.state_dir.as_ref().map(|d| d.join("sessions"));
        let session_id = loop {
            let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
            let taken = log_dir.as_ref().is_some_and(|d| d.join(format!("{id}.jsonl")).exists());
            if !taken {
                break id;
            }
        };
        let mut log = EventLog::new(log_dir.map(|d| d.join(format!("{session_id}.jsonl"))));
        log.append(SessionEvent::SessionCreated {
            album_id: album_id.to_owned(),
        });
        let session = Session {
            session_id: session_id.clone(),
            album_id: album_id.to_owned(),
            query: None,
            examples: ExampleSet::empty(),
            last_outcome: None,
            last_response: None,
            saved: BTreeSet::new(),
            log,
        };
        self.sessions
            .write()
            .expect("session lock")
            .insert(session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(session_id)
    }

    pub fn session(&self, session_id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session lock")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{session_id}`")))
    }
}
