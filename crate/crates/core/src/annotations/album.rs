use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use super::geometry::SpatialConfig;
use super::ImageAnnotation;
use crate::dsl::{Constant, KnownVocabulary, FACE};

pub const TAGS_FILE: &str = "tags.json";

#[derive(Debug, Error)]
pub enum AlbumError {
    #[error("{file}: {detail}")]
    Schema { file: String, detail: String },
    #[error("duplicate image id `{0}`")]
    DuplicateImageId(String),
    #[error("unknown face cluster or object `{0}`")]
    UnknownCluster(String),
    #[error("`{0}` is a built-in constant and cannot be used as a tag")]
    ReservedName(String),
    #[error("invalid tag name `{0}`")]
    InvalidName(String),
    #[error("confidence threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A specific detected object in a specific image.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRef {
    pub image_id: String,
    pub object_id: String,
}

/// What a tag name denotes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TagTarget {
    FaceCluster(String),
    Objects(BTreeSet<ObjectRef>),
}

/// User-assigned names for face clusters or individual objects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagRegistry {
    names: BTreeMap<Constant, TagTarget>,
}

impl TagRegistry {
    pub fn get(&self, name: &Constant) -> Option<&TagTarget> {
        self.names.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Constant, &TagTarget)> {
        self.names.iter()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

// serde needs Constant keys as strings
impl Serialize for Constant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Constant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Constant::new(&raw).ok_or_else(|| serde::de::Error::custom("empty constant"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlbumSummary {
    pub album_id: String,
    pub images: usize,
    pub objects: usize,
    pub faces: usize,
    pub face_clusters: usize,
    pub labels: usize,
    pub tags: usize,
}

/// A set of annotated images plus the user's tags.
///
/// The derived vocabulary is recomputed on every mutation, so it always
/// equals `derive_vocabulary(images, tags)`.
#[derive(Debug, Clone)]
pub struct Album {
    album_id: String,
    images: BTreeMap<String, ImageAnnotation>,
    tags: TagRegistry,
    confidence_threshold: f64,
    spatial: SpatialConfig,
    vocabulary: KnownVocabulary,
}

impl Album {
    pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;

    pub fn new(album_id: &str, images: Vec<ImageAnnotation>) -> Result<Self, AlbumError> {
        let mut map = BTreeMap::new();
        for image in images {
            image.validate().map_err(|detail| AlbumError::Schema {
                file: image.image_id.clone(),
                detail,
            })?;
            if map.contains_key(&image.image_id) {
                return Err(AlbumError::DuplicateImageId(image.image_id));
            }
            map.insert(image.image_id.clone(), image);
        }
        let mut album = Self {
            album_id: album_id.to_owned(),
            images: map,
            tags: TagRegistry::default(),
            confidence_threshold: Self::DEFAULT_CONFIDENCE_THRESHOLD,
            spatial: SpatialConfig::default(),
            vocabulary: KnownVocabulary::default(),
        };
        album.refresh();
        Ok(album)
    }

    pub fn album_id(&self) -> &str {
        &self.album_id
    }

    pub fn images(&self) -> impl ExactSizeIterator<Item = &ImageAnnotation> {
        self.images.values()
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.images.keys().map(String::as_str)
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageAnnotation> {
        self.images.get(image_id)
    }

    pub fn contains_image(&self, image_id: &str) -> bool {
        self.images.contains_key(image_id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn tags(&self) -> &TagRegistry {
        &self.tags
    }

    pub fn vocabulary(&self) -> &KnownVocabulary {
        &self.vocabulary
    }

    pub fn confidence_threshold(&self) -> f64 {
        self.confidence_threshold
    }

    pub fn spatial(&self) -> &SpatialConfig {
        &self.spatial
    }

    pub fn set_confidence_threshold(&mut self, threshold: f64) -> Result<(), AlbumError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(AlbumError::BadThreshold(threshold));
        }
        self.confidence_threshold = threshold;
        self.refresh();
        Ok(())
    }

    pub fn set_spatial(&mut self, spatial: SpatialConfig) {
        self.spatial = spatial;
        self.refresh();
    }

    pub fn face_clusters(&self) -> BTreeSet<&str> {
        self.images
            .values()
            .flat_map(|img| img.objects.iter())
            .filter_map(|o| o.face_attributes().map(|f| f.cluster.as_str()))
            .collect()
    }

    /// Names a face cluster or a set of objects. An existing name is
    /// replaced.
    pub fn register_tag(&mut self, name: &str, target: TagTarget) -> Result<(), AlbumError> {
        let name_const = Constant::new(name).ok_or_else(|| AlbumError::InvalidName(name.to_owned()))?;
        if name_const.as_str() == FACE {
            return Err(AlbumError::ReservedName(name_const.to_string()));
        }
        match &target {
            TagTarget::FaceCluster(cluster) => {
                if !self.face_clusters().contains(cluster.as_str()) {
                    return Err(AlbumError::UnknownCluster(cluster.clone()));
                }
            }
            TagTarget::Objects(refs) => {
                if refs.is_empty() {
                    return Err(AlbumError::UnknownCluster("<empty object set>".into()));
                }
                for r in refs {
                    let exists = self
                        .images
                        .get(&r.image_id)
                        .and_then(|img| img.object(&r.object_id))
                        .is_some();
                    if !exists {
                        return Err(AlbumError::UnknownCluster(format!("{}/{}", r.image_id, r.object_id)));
                    }
                }
            }
        }
        self.tags.names.insert(name_const, target);
        self.refresh();
        Ok(())
    }

    pub fn summary(&self) -> AlbumSummary {
        let objects = self.images.values().map(|i| i.objects.len()).sum();
        let faces = self
            .images
            .values()
            .flat_map(|i| i.objects.iter())
            .filter(|o| o.is_face())
            .count();
        let labels = self
            .images
            .values()
            .flat_map(|i| i.objects.iter())
            .filter_map(|o| o.label())
            .collect::<BTreeSet<_>>()
            .len();
        AlbumSummary {
            album_id: self.album_id.clone(),
            images: self.images.len(),
            objects,
            faces,
            face_clusters: self.face_clusters().len(),
            labels,
            tags: self.tags.len(),
        }
    }

    fn refresh(&mut self) {
        self.vocabulary = derive_vocabulary(self.images.values(), &self.tags);
    }
}

/// Album labels, `face`, the built-in property/emotion/relation constants,
/// any further properties/emotions seen in the annotations, and tag names.
pub fn derive_vocabulary<'a>(
    images: impl IntoIterator<Item = &'a ImageAnnotation>,
    tags: &TagRegistry,
) -> KnownVocabulary {
    let mut labels = BTreeSet::new();
    let mut properties = BTreeSet::new();
    let mut emotions = BTreeSet::new();
    for obj in images.into_iter().flat_map(|i| i.objects.iter()) {
        if let Some(label) = obj.label() {
            labels.insert(label.as_str());
        }
        if let Some(face) = obj.face_attributes() {
            properties.extend(face.properties.iter().map(|p| p.as_str()));
            emotions.extend(face.emotion.as_ref().map(|e| e.as_str()));
        }
    }
    KnownVocabulary::builtin()
        .with_types(labels)
        .with_properties(properties)
        .with_emotions(emotions)
        .with_tags(tags.names.keys().map(|k| k.as_str()))
}

/// Loads every `*.json` annotation file in `dir` (plus an optional
/// `tags.json`) as album `album_id`.
pub fn load_album(dir: &Path, album_id: &str) -> Result<Album, AlbumError> {
    let io = |source| AlbumError::Io {
        path: dir.to_owned(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != TAGS_FILE))
        .collect();
    files.sort();

    let mut images = Vec::with_capacity(files.len());
    let mut first_error = None;
    for path in &files {
        let file = path.file_name().unwrap().to_string_lossy().into_owned();
        let parsed = fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| ImageAnnotation::from_json(&text));
        match parsed {
            Ok(image) => images.push(image),
            Err(detail) => {
                warn!(%file, %detail, "invalid annotation file");
                first_error.get_or_insert(AlbumError::Schema { file, detail });
            }
        }
    }
    if let Some(err) = first_error {
        return Err(err);
    }

    let mut album = Album::new(album_id, images)?;
    let tags_path = dir.join(TAGS_FILE);
    if tags_path.is_file() {
        let text = fs::read_to_string(&tags_path).map_err(|source| AlbumError::Io {
            path: tags_path.clone(),
            source,
        })?;
        let tags: BTreeMap<String, TagTarget> =
            serde_json::from_str(&text).map_err(|e| AlbumError::Schema {
                file: TAGS_FILE.into(),
                detail: e.to_string(),
            })?;
        for (name, target) in tags {
            album.register_tag(&name, target)?;
        }
    }
    Ok(album)
}

impl Album {
    /// Writes the album in the on-disk layout `load_album` reads.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for image in self.images.values() {
            fs::write(dir.join(format!("{}.json", image.image_id)), image.to_json())?;
        }
        if !self.tags.is_empty() {
            fs::write(
                dir.join(TAGS_FILE),
                serde_json::to_string_pretty(&self.tags).expect("tags serialize"),
            )?;
        }
        Ok(())
    }
}
