//! Request and response bodies. Every body travels inside the
//! `{"v": 1, ...}` envelope.

use std::collections::BTreeSet;

use photoscout::annotations::{AlbumSummary, ObjectRecord, ObjectRef, TagTarget};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateAlbum {
    pub album_id: String,
    /// Directory under the album root; defaults to `album_id`.
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlbumCreated {
    pub summary: AlbumSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: usize,
    pub thumbnail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageList {
    pub album_id: String,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnotatedObject {
    #[serde(flatten)]
    pub record: ObjectRecord,
    /// Hover text.
    pub description: String,
    /// Tag names that denote this object.
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Annotation {
    pub album_id: String,
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<AnnotatedObject>,
}

/// Exactly one of `face_cluster` and `objects`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AddTag {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_cluster: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<BTreeSet<ObjectRef>>,
    /// Records the tag in this session's event log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagAdded {
    pub album_id: String,
    pub name: String,
    pub target: TagTarget,
    pub replaced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub album_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub album_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchRequest {
    /// Defaults to the session's previous query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default)]
    pub positive: Vec<String>,
    #[serde(default)]
    pub negative: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SaveRequest {
    /// Defaults to every result of the last search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedSet {
    pub saved: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRequest {
    pub destination: String,
}

/// The file an export writes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub v: u32,
    pub album_id: String,
    pub session_id: String,
    pub query: String,
    pub program: Option<String>,
    pub image_ids: Vec<String>,
    /// RFC 3339, UTC.
    pub exported_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exported {
    pub manifest_path: String,
    pub manifest: ExportManifest,
}

pub const MANIFEST_FILE: &str = "photoscout-manifest.json";
