use std::collections::BTreeSet;

use super::{canonicalize, Constant, Slot};

/// The type constant every detected face satisfies.
pub const FACE: &str = "face";

/// Face attributes the annotation format can carry.
pub const BUILTIN_PROPERTIES: [&str; 7] = [
    "beard",
    "eyeglasses",
    "eyesopen",
    "mouthopen",
    "mustache",
    "smiling",
    "sunglasses",
];

pub const BUILTIN_EMOTIONS: [&str; 8] = [
    "angry",
    "calm",
    "confused",
    "disgusted",
    "fear",
    "happy",
    "sad",
    "surprised",
];

/// Spatial relations understood by `HasRelation`.
pub const BUILTIN_RELATIONS: [&str; 7] = [
    "above", "below", "contains", "inside", "left", "nextto", "right",
];

/// Irregular plurals seen in queries about people.
const IRREGULAR_PLURALS: [(&str, &str); 4] = [
    ("people", "person"),
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
];

/// The constants a parser may treat as known, grouped by slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnownVocabulary {
    types: BTreeSet<Constant>,
    tags: BTreeSet<Constant>,
    properties: BTreeSet<Constant>,
    emotions: BTreeSet<Constant>,
    relations: BTreeSet<Constant>,
}

fn constants<'a>(tokens: impl IntoIterator<Item = &'a str>) -> BTreeSet<Constant> {
    tokens.into_iter().filter_map(Constant::new).collect()
}

impl KnownVocabulary {
    /// `face` plus the built-in property, emotion and relation constants.
    pub fn builtin() -> Self {
        Self {
            types: constants([FACE]),
            tags: BTreeSet::new(),
            properties: constants(BUILTIN_PROPERTIES),
            emotions: constants(BUILTIN_EMOTIONS),
            relations: constants(BUILTIN_RELATIONS),
        }
    }

    pub fn with_types<'a>(mut self, labels: impl IntoIterator<Item = &'a str>) -> Self {
        self.types.extend(constants(labels));
        self
    }

    pub fn with_tags<'a>(mut self, names: impl IntoIterator<Item = &'a str>) -> Self {
        self.tags.extend(constants(names));
        self
    }

    pub fn with_properties<'a>(mut self, props: impl IntoIterator<Item = &'a str>) -> Self {
        self.properties.extend(constants(props));
        self
    }

    pub fn with_emotions<'a>(mut self, emotions: impl IntoIterator<Item = &'a str>) -> Self {
        self.emotions.extend(constants(emotions));
        self
    }

    pub fn tags(&self) -> &BTreeSet<Constant> {
        &self.tags
    }

    pub fn is_tag(&self, c: &Constant) -> bool {
        self.tags.contains(c)
    }

    pub fn contains(&self, slot: Slot, c: &Constant) -> bool {
        match slot {
            Slot::TypeConst => self.types.contains(c) || self.tags.contains(c),
            Slot::PropertyConst => self.properties.contains(c),
            Slot::EmotionConst => self.emotions.contains(c),
            Slot::RelationConst => self.relations.contains(c),
        }
    }

    /// Candidate constants for a slot in lexicographic order.
    pub fn candidates(&self, slot: Slot) -> Vec<Constant> {
        match slot {
            Slot::TypeConst => self
                .types
                .union(&self.tags)
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            Slot::PropertyConst => self.properties.iter().cloned().collect(),
            Slot::EmotionConst => self.emotions.iter().cloned().collect(),
            Slot::RelationConst => self.relations.iter().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.types.union(&self.tags).count()
            + self.properties.len()
            + self.emotions.len()
            + self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Maps a source token to a known constant of `slot`, if any.
    ///
    /// Matching is case-insensitive and ignores `_`, `-` and spaces, so
    /// `NextTo`, `next_to` and `next to` all resolve to `nextto`. Type tokens
    /// additionally match through their singular form (`Flowers` -> `flower`).
    pub fn resolve(&self, slot: Slot, token: &str) -> Option<Constant> {
        let canonical = canonicalize(token);
        let exact = Constant::new(&canonical)?;
        if self.contains(slot, &exact) {
            return Some(exact);
        }
        let squash = |s: &str| s.chars().filter(|c| !matches!(c, '_' | '-' | ' ')).collect::<String>();
        let key = squash(&canonical);
        let pool = self.candidates(slot);
        if let Some(hit) = pool.iter().find(|c| squash(c.as_str()) == key) {
            return Some(hit.clone());
        }
        if slot == Slot::TypeConst {
            for singular in singular_forms(&key) {
                if let Some(hit) = pool.iter().find(|c| squash(c.as_str()) == singular) {
                    return Some(hit.clone());
                }
            }
        }
        None
    }
}

fn singular_forms(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some((_, singular)) = IRREGULAR_PLURALS.iter().find(|(p, _)| *p == word) {
        out.push((*singular).to_owned());
    }
    if let Some(stem) = word.strip_suffix("ies") {
        out.push(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("es") {
        out.push(stem.to_owned());
    }
    if let Some(stem) = word.strip_suffix('s') {
        if !stem.is_empty() {
            out.push(stem.to_owned());
        }
    }
    out
}
