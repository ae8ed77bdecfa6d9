//! Per-image perception facts, the tag registry and album loading.
//!
//! Detection results are precomputed: each image has one JSON annotation file
//! listing the detected things and faces with bounding boxes, confidences and
//! face attributes. Faces that belong to the same person share a
//! `face_cluster` id across images.

mod album;
mod geometry;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsl::Constant;

pub use album::{load_album, Album, AlbumError, AlbumSummary, ObjectRef, TagRegistry, TagTarget};
pub use geometry::{spatial_relation, BBox, SpatialConfig, SpatialRelation, UnknownRelation};

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectKind {
    Thing { label: Constant },
    Face(FaceAttributes),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaceAttributes {
    pub cluster: String,
    pub properties: BTreeSet<Constant>,
    pub emotion: Option<Constant>,
    pub age_range: Option<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedObject {
    pub object_id: String,
    pub confidence: f64,
    pub bbox: BBox,
    pub kind: ObjectKind,
}

impl DetectedObject {
    pub fn thing(object_id: &str, label: &str, confidence: f64, bbox: BBox) -> Self {
        Self {
            object_id: object_id.to_owned(),
            confidence,
            bbox,
            kind: ObjectKind::Thing {
                label: Constant::new(label).expect("nonempty label"),
            },
        }
    }

    pub fn face(object_id: &str, cluster: &str, confidence: f64, bbox: BBox) -> Self {
        Self {
            object_id: object_id.to_owned(),
            confidence,
            bbox,
            kind: ObjectKind::Face(FaceAttributes {
                cluster: cluster.to_owned(),
                ..FaceAttributes::default()
            }),
        }
    }

    pub fn with_properties<'a>(mut self, props: impl IntoIterator<Item = &'a str>) -> Self {
        if let ObjectKind::Face(attrs) = &mut self.kind {
            attrs.properties.extend(props.into_iter().filter_map(Constant::new));
        }
        self
    }

    pub fn with_emotion(mut self, emotion: &str) -> Self {
        if let ObjectKind::Face(attrs) = &mut self.kind {
            attrs.emotion = Constant::new(emotion);
        }
        self
    }

    pub fn with_age_range(mut self, lo: u32, hi: u32) -> Self {
        if let ObjectKind::Face(attrs) = &mut self.kind {
            attrs.age_range = Some([lo, hi]);
        }
        self
    }

    pub fn is_face(&self) -> bool {
        matches!(self.kind, ObjectKind::Face(_))
    }

    pub fn label(&self) -> Option<&Constant> {
        match &self.kind {
            ObjectKind::Thing { label } => Some(label),
            ObjectKind::Face(_) => None,
        }
    }

    pub fn face_attributes(&self) -> Option<&FaceAttributes> {
        match &self.kind {
            ObjectKind::Face(attrs) => Some(attrs),
            ObjectKind::Thing { .. } => None,
        }
    }

    /// One-line description of what the detector reported, for hover text.
    pub fn describe(&self) -> String {
        let pct = (self.confidence * 100.0).round();
        match &self.kind {
            ObjectKind::Thing { label } => format!("{label} ({pct}% confidence)"),
            ObjectKind::Face(attrs) => {
                let mut parts = vec![format!("face {} ({pct}% confidence)", attrs.cluster)];
                if !attrs.properties.is_empty() {
                    let props: Vec<&str> = attrs.properties.iter().map(|p| p.as_str()).collect();
                    parts.push(props.join(", "));
                }
                if let Some(e) = &attrs.emotion {
                    parts.push(format!("looks {e}"));
                }
                if let Some([lo, hi]) = attrs.age_range {
                    parts.push(format!("between {lo} and {hi} years old"));
                }
                parts.join("; ")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotation {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<DetectedObject>,
}

impl ImageAnnotation {
    pub fn new(image_id: &str, objects: Vec<DetectedObject>) -> Self {
        Self {
            image_id: image_id.to_owned(),
            width: 4000,
            height: 3000,
            objects,
        }
    }

    pub fn object(&self, object_id: &str) -> Option<&DetectedObject> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    /// Checks the per-object and per-image invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.image_id.trim().is_empty() {
            return Err("image_id is empty".into());
        }
        let mut seen = BTreeSet::new();
        for obj in &self.objects {
            if !seen.insert(obj.object_id.as_str()) {
                return Err(format!("duplicate object_id `{}`", obj.object_id));
            }
            if !(0.0..=1.0).contains(&obj.confidence) {
                return Err(format!(
                    "object `{}`: confidence {} outside [0, 1]",
                    obj.object_id, obj.confidence
                ));
            }
            obj.bbox
                .validate()
                .map_err(|e| format!("object `{}`: {e}", obj.object_id))?;
            if let ObjectKind::Face(attrs) = &obj.kind {
                if attrs.cluster.trim().is_empty() {
                    return Err(format!("face `{}` has an empty face_cluster", obj.object_id));
                }
                if let Some([lo, hi]) = attrs.age_range {
                    if lo > hi {
                        return Err(format!("face `{}`: age_range [{lo}, {hi}] is inverted", obj.object_id));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses and validates one annotation file.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: AnnotationFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let image = file.into_annotation()?;
        image.validate()?;
        Ok(image)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&AnnotationFile::from(self)).expect("annotation serializes")
    }
}

/// On-disk schema of an annotation file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindTag {
    Thing,
    Face,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub object_id: String,
    pub kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_cluster: Option<String>,
    pub confidence: f64,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub properties: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_range: Option<[u32; 2]>,
}

impl AnnotationFile {
    fn into_annotation(self) -> Result<ImageAnnotation, String> {
        let objects = self
            .objects
            .into_iter()
            .map(ObjectRecord::into_object)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ImageAnnotation {
            image_id: self.image_id,
            width: self.width,
            height: self.height,
            objects,
        })
    }
}

impl ObjectRecord {
    fn into_object(self) -> Result<DetectedObject, String> {
        let id = self.object_id.clone();
        let kind = match self.kind {
            KindTag::Thing => {
                if self.face_cluster.is_some()
                    || self.properties.is_some()
                    || self.emotion.is_some()
                    || self.age_range.is_some()
                {
                    return Err(format!("thing `{id}` carries face attributes"));
                }
                let label = self
                    .label
                    .as_deref()
                    .and_then(Constant::new)
                    .ok_or_else(|| format!("thing `{id}` has no label"))?;
                ObjectKind::Thing { label }
            }
            KindTag::Face => {
                if self.label.is_some() {
                    return Err(format!("face `{id}` carries a label"));
                }
                let cluster = self
                    .face_cluster
                    .ok_or_else(|| format!("face `{id}` has no face_cluster"))?;
                let properties = self
                    .properties
                    .unwrap_or_default()
                    .iter()
                    .map(|p| Constant::new(p).ok_or_else(|| format!("face `{id}` has an empty property")))
                    .collect::<Result<_, _>>()?;
                let emotion = match self.emotion {
                    Some(e) => Some(Constant::new(&e).ok_or_else(|| format!("face `{id}` has an empty emotion"))?),
                    None => None,
                };
                ObjectKind::Face(FaceAttributes {
                    cluster,
                    properties,
                    emotion,
                    age_range: self.age_range,
                })
            }
        };
        Ok(DetectedObject {
            object_id: self.object_id,
            confidence: self.confidence,
            bbox: self.bbox,
            kind,
        })
    }
}

impl From<&ImageAnnotation> for AnnotationFile {
    fn from(image: &ImageAnnotation) -> Self {
        let objects = image
            .objects
            .iter()
            .map(|o| {
                let mut rec = ObjectRecord {
                    object_id: o.object_id.clone(),
                    kind: KindTag::Thing,
                    label: None,
                    face_cluster: None,
                    confidence: o.confidence,
                    bbox: o.bbox,
                    properties: None,
                    emotion: None,
                    age_range: None,
                };
                match &o.kind {
                    ObjectKind::Thing { label } => rec.label = Some(label.to_string()),
                    ObjectKind::Face(attrs) => {
                        rec.kind = KindTag::Face;
                        rec.face_cluster = Some(attrs.cluster.clone());
                        if !attrs.properties.is_empty() {
                            rec.properties =
                                Some(attrs.properties.iter().map(|p| p.to_string()).collect());
                        }
                        rec.emotion = attrs.emotion.as_ref().map(|e| e.to_string());
                        rec.age_range = attrs.age_range;
                    }
                }
                rec
            })
            .collect();
        AnnotationFile {
            image_id: image.image_id.clone(),
            width: image.width,
            height: image.height,
            objects,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{ "image_id": "w_0001", "width": 4000, "height": 3000,
  "objects": [
    { "object_id": "o1", "kind": "thing", "label": "flower",
      "confidence": 0.93, "bbox": {"x":0.41,"y":0.52,"w":0.10,"h":0.12} },
    { "object_id": "o2", "kind": "face", "face_cluster": "c17",
      "confidence": 0.99, "bbox": {"x":0.38,"y":0.20,"w":0.08,"h":0.11},
      "properties": ["smiling","eyesopen"], "emotion": "happy",
      "age_range": [31,41] } ] }"#;

    #[test]
    fn parses_documented_sample() {
        let img = ImageAnnotation::from_json(SAMPLE).unwrap();
        assert_eq!(img.image_id, "w_0001");
        assert_eq!(img.objects.len(), 2);
        assert_eq!(img.objects[0].label().unwrap().as_str(), "flower");
        let face = img.objects[1].face_attributes().unwrap();
        assert_eq!(face.cluster, "c17");
        assert_eq!(face.properties.len(), 2);
        assert_eq!(face.emotion.as_ref().unwrap().as_str(), "happy");
        assert_eq!(face.age_range, Some([31, 41]));
        assert!(img.objects[1].describe().contains("smiling"));
        assert!(img.objects[1].describe().contains("between 31 and 41"));
    }

    #[test]
    fn json_round_trip() {
        let img = ImageAnnotation::from_json(SAMPLE).unwrap();
        let again = ImageAnnotation::from_json(&img.to_json()).unwrap();
        assert_eq!(img, again);
    }

    #[test]
    fn rejects_schema_violations() {
        let cases = [
            SAMPLE.replace("\"x\":0.41", "\"x\":0.95"),
            SAMPLE.replace("\"confidence\": 0.93", "\"confidence\": 1.5"),
            SAMPLE.replace("\"label\": \"flower\",", ""),
            SAMPLE.replace("\"face_cluster\": \"c17\",", ""),
            SAMPLE.replace("\"kind\": \"thing\", \"label\": \"flower\"", "\"kind\": \"thing\", \"label\": \"flower\", \"emotion\": \"sad\""),
            SAMPLE.replace("\"width\": 4000", "\"width\": 4000, \"camera\": \"x\""),
            SAMPLE.replace("\"o2\"", "\"o1\""),
            SAMPLE.replace("[31,41]", "[41,31]"),
            SAMPLE.replace("\"kind\": \"face\"", "\"kind\": \"person\""),
        ];
        for (i, bad) in cases.iter().enumerate() {
            assert!(ImageAnnotation::from_json(bad).is_err(), "case {i} should fail");
        }
    }
}
