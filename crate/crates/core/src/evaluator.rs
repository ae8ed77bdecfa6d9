//! Truth semantics of query programs over one annotated image.
//!
//! Quantifiers range over the image's objects whose confidence is at least
//! the album threshold. Evaluation is plain nested enumeration with
//! short-circuiting, `O(n^k * |expr|)` for `n` objects and quantifier depth
//! `k`; images hold tens of objects so no indexing is done.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::annotations::{Album, DetectedObject, ImageAnnotation, ObjectKind, ObjectRef, SpatialRelation, TagTarget};
use crate::dsl::{Constant, ParseError, QueryExpr, Relation, Slot, Term, FACE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown {} constant `{constant}`", slot.name())]
    UnknownConstant { slot: Slot, constant: String },
    #[error("program still contains holes")]
    HasHoles,
    #[error("program is not closed: {0}")]
    NotClosed(#[from] ParseError),
}

#[derive(Debug, Clone)]
enum TypeTest {
    AnyFace,
    Cluster(String),
    Objects(BTreeSet<ObjectRef>),
    Label(Constant),
}

/// Variables are compiled to positions in the binding stack.
#[derive(Debug, Clone)]
enum Node {
    Type(usize, TypeTest),
    Property(usize, Constant),
    Emotion(usize, Constant),
    Spatial(usize, usize, SpatialRelation),
    Implies(Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Not(Box<Node>),
    Exists(Box<Node>),
    Forall(Box<Node>),
}

/// A program checked against an album's vocabulary and tags, ready to run on
/// that album's images.
#[derive(Debug, Clone)]
pub struct CompiledQuery<'a> {
    root: Node,
    album: &'a Album,
}

impl<'a> CompiledQuery<'a> {
    pub fn new(expr: &QueryExpr, album: &'a Album) -> Result<Self, EvalError> {
        if !expr.is_hole_free() {
            return Err(EvalError::HasHoles);
        }
        expr.check_closed()?;
        let mut scope = Vec::new();
        let root = compile(expr, album, &mut scope)?;
        Ok(Self { root, album })
    }

    pub fn matches(&self, image: &ImageAnnotation) -> bool {
        let threshold = self.album.confidence_threshold();
        let domain: Vec<&DetectedObject> = image
            .objects
            .iter()
            .filter(|o| o.confidence >= threshold)
            .collect();
        let ctx = Context {
            image_id: &image.image_id,
            domain: &domain,
            album: self.album,
        };
        let mut env = Vec::new();
        ctx.eval(&self.root, &mut env)
    }
}

fn compile<'e>(
    expr: &'e QueryExpr,
    album: &Album,
    scope: &mut Vec<&'e str>,
) -> Result<Node, EvalError> {
    let index_of = |scope: &[&str], name: &str| {
        scope
            .iter()
            .rposition(|v| *v == name)
            .expect("closed formula")
    };
    Ok(match expr {
        QueryExpr::Pred(p) => {
            let subject = index_of(scope, p.subject().as_str());
            let Term::Const(c) = p.value() else {
                return Err(EvalError::HasHoles);
            };
            let slot = p.relation().slot();
            if !album.vocabulary().contains(slot, c) {
                return Err(EvalError::UnknownConstant {
                    slot,
                    constant: c.to_string(),
                });
            }
            match p.relation() {
                Relation::HasType => Node::Type(subject, type_test(c, album)),
                Relation::HasProperty => Node::Property(subject, c.clone()),
                Relation::HasEmotion => Node::Emotion(subject, c.clone()),
                Relation::HasRelation => {
                    let object = index_of(scope, p.object().expect("ternary").as_str());
                    let rel = c.as_str().parse().map_err(|_| EvalError::UnknownConstant {
                        slot,
                        constant: c.to_string(),
                    })?;
                    Node::Spatial(subject, object, rel)
                }
            }
        }
        QueryExpr::Implies(l, r) => Node::Implies(
            Box::new(compile(l, album, scope)?),
            Box::new(compile(r, album, scope)?),
        ),
        QueryExpr::And(l, r) => Node::And(
            Box::new(compile(l, album, scope)?),
            Box::new(compile(r, album, scope)?),
        ),
        QueryExpr::Or(l, r) => Node::Or(
            Box::new(compile(l, album, scope)?),
            Box::new(compile(r, album, scope)?),
        ),
        QueryExpr::Not(e) => Node::Not(Box::new(compile(e, album, scope)?)),
        QueryExpr::Exists(v, body) | QueryExpr::Forall(v, body) => {
            scope.push(v.as_str());
            let body = compile(body, album, scope);
            scope.pop();
            let body = Box::new(body?);
            if matches!(expr, QueryExpr::Exists(..)) {
                Node::Exists(body)
            } else {
                Node::Forall(body)
            }
        }
    })
}

fn type_test(c: &Constant, album: &Album) -> TypeTest {
    if c.as_str() == FACE {
        return TypeTest::AnyFace;
    }
    match album.tags().get(c) {
        Some(TagTarget::FaceCluster(cluster)) => TypeTest::Cluster(cluster.clone()),
        Some(TagTarget::Objects(refs)) => TypeTest::Objects(refs.clone()),
        None => TypeTest::Label(c.clone()),
    }
}

struct Context<'a> {
    image_id: &'a str,
    domain: &'a [&'a DetectedObject],
    album: &'a Album,
}

impl Context<'_> {
    fn eval(&self, node: &Node, env: &mut Vec<usize>) -> bool {
        let obj = |i: usize| self.domain[env[i]];
        match node {
            Node::Type(v, test) => {
                let o = obj(*v);
                match (test, &o.kind) {
                    (TypeTest::AnyFace, kind) => matches!(kind, ObjectKind::Face(_)),
                    (TypeTest::Cluster(c), ObjectKind::Face(f)) => &f.cluster == c,
                    (TypeTest::Cluster(_), _) => false,
                    (TypeTest::Objects(refs), _) => refs.iter().any(|r| {
                        r.image_id == self.image_id && r.object_id == o.object_id
                    }),
                    (TypeTest::Label(c), ObjectKind::Thing { label }) => label == c,
                    (TypeTest::Label(_), _) => false,
                }
            }
            Node::Property(v, c) => obj(*v).face_attributes().is_some_and(|f| f.properties.contains(c)),
            Node::Emotion(v, c) => obj(*v).face_attributes().is_some_and(|f| f.emotion.as_ref() == Some(c)),
            Node::Spatial(a, b, rel) => {
                env[*a] != env[*b] && self.album.spatial().holds(*rel, &obj(*a).bbox, &obj(*b).bbox)
            }
            Node::Implies(l, r) => !self.eval(l, env) || self.eval(r, env),
            Node::And(l, r) => self.eval(l, env) && self.eval(r, env),
            Node::Or(l, r) => self.eval(l, env) || self.eval(r, env),
            Node::Not(e) => !self.eval(e, env),
            Node::Exists(body) => self.quantify(body, env, true),
            Node::Forall(body) => self.quantify(body, env, false),
        }
    }

    /// Existential when `any`, universal otherwise.
    fn quantify(&self, body: &Node, env: &mut Vec<usize>, any: bool) -> bool {
        env.push(0);
        let mut result = !any;
        for i in 0..self.domain.len() {
            *env.last_mut().unwrap() = i;
            if self.eval(body, env) == any {
                result = any;
                break;
            }
        }
        env.pop();
        result
    }
}

/// Evaluates a complete program on one image.
pub fn eval(expr: &QueryExpr, image: &ImageAnnotation, album: &Album) -> Result<bool, EvalError> {
    Ok(CompiledQuery::new(expr, album)?.matches(image))
}

/// Ids of all album images the program accepts, in lexicographic order.
pub fn search(expr: &QueryExpr, album: &Album) -> Result<Vec<String>, EvalError> {
    let query = CompiledQuery::new(expr, album)?;
    let images: Vec<&ImageAnnotation> = album.images().collect();
    Ok(images
        .par_iter()
        .filter(|img| query.matches(img))
        .map(|img| img.image_id.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{BBox, DetectedObject};
    use crate::dsl::parse;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    /// Four smiling faces, each above its own bouquet.
    fn bridesmaids() -> ImageAnnotation {
        let mut objects = Vec::new();
        for i in 0..4 {
            let x = 0.05 + 0.24 * i as f64;
            objects.push(
                DetectedObject::face(&format!("f{i}"), &format!("c{i}"), 0.98, bb(x, 0.2, 0.08, 0.1))
                    .with_properties(["smiling", "eyesopen"]),
            );
            objects.push(DetectedObject::thing(&format!("b{i}"), "flower", 0.9, bb(x - 0.01, 0.45, 0.1, 0.1)));
        }
        ImageAnnotation::new("bridesmaids", objects)
    }

    fn album_of(images: Vec<ImageAnnotation>) -> Album {
        Album::new("test", images).unwrap()
    }

    const EXAMPLE_4_1: &str = "forall x. HasType(x, Face) -> HasProperty(x, Smiling) && exists y. HasType(y, Flower) && HasRelation(x, y, Above)";

    #[test]
    fn every_face_smiling_above_flowers() {
        let album = album_of(vec![bridesmaids()]);
        let program = parse(EXAMPLE_4_1).unwrap();
        assert!(eval(&program, album.image("bridesmaids").unwrap(), &album).unwrap());

        // one face stops smiling
        let mut img = bridesmaids();
        if let ObjectKind::Face(f) = &mut img.objects[2].kind {
            f.properties.clear();
        }
        let album2 = album_of(vec![img]);
        assert!(!eval(&program, album2.image("bridesmaids").unwrap(), &album2).unwrap());
    }

    #[test]
    fn vacuous_quantifiers_on_empty_image() {
        let album = album_of(vec![ImageAnnotation::new("empty", vec![]), bridesmaids()]);
        let empty = album.image("empty").unwrap();
        assert!(eval(&parse(EXAMPLE_4_1).unwrap(), empty, &album).unwrap());
        assert!(!eval(&parse("exists x. HasType(x, Face)").unwrap(), empty, &album).unwrap());
        assert!(eval(&parse("forall x. HasType(x, Flower)").unwrap(), empty, &album).unwrap());
    }

    #[test]
    fn low_confidence_objects_are_outside_the_domain() {
        let img = ImageAnnotation::new(
            "i",
            vec![
                DetectedObject::thing("o1", "car", 0.4, bb(0.1, 0.1, 0.1, 0.1)),
                DetectedObject::thing("o2", "bicycle", 0.6, bb(0.5, 0.1, 0.1, 0.1)),
            ],
        );
        let mut album = album_of(vec![img]);
        let car = parse("exists x. HasType(x, Car)").unwrap();
        let img = album.image("i").unwrap().clone();
        assert!(!eval(&car, &img, &album).unwrap());
        album.set_confidence_threshold(0.3).unwrap();
        assert!(eval(&car, &img, &album).unwrap());
    }

    #[test]
    fn face_tags_match_clusters() {
        let mut album = album_of(vec![bridesmaids()]);
        album.register_tag("jane", TagTarget::FaceCluster("c2".into())).unwrap();
        let img = album.image("bridesmaids").unwrap().clone();
        let q = parse("exists x. HasType(x, Jane) && HasProperty(x, Smiling)").unwrap();
        assert!(eval(&q, &img, &album).unwrap());
        // jane is the third face; only one object is jane
        let two = parse("exists x. exists y. HasType(x, Jane) && HasType(y, Jane) && HasRelation(x, y, NextTo)").unwrap();
        assert!(!eval(&two, &img, &album).unwrap());
    }

    #[test]
    fn object_tags_match_specific_objects() {
        let mut album = album_of(vec![bridesmaids()]);
        let refs = [ObjectRef { image_id: "bridesmaids".into(), object_id: "b1".into() }].into();
        album.register_tag("my bouquet", TagTarget::Objects(refs)).unwrap();
        let img = album.image("bridesmaids").unwrap().clone();
        let q = parse(r#"exists x. exists y. HasType(x, Face) && HasType(y, "my bouquet") && HasRelation(x, y, Above)"#).unwrap();
        assert!(eval(&q, &img, &album).unwrap());
        let only = parse(r#"forall y. HasType(y, "my bouquet") -> HasType(y, Flower)"#).unwrap();
        assert!(eval(&only, &img, &album).unwrap());
    }

    #[test]
    fn properties_and_emotions_are_false_for_things() {
        let img = ImageAnnotation::new(
            "i",
            vec![
                DetectedObject::thing("o1", "dog", 0.9, bb(0.1, 0.1, 0.1, 0.1)),
                DetectedObject::face("o2", "c1", 0.9, bb(0.5, 0.1, 0.1, 0.1)).with_properties(["smiling"]),
            ],
        );
        let album = album_of(vec![img]);
        let img = album.image("i").unwrap();
        let q = parse("exists x. HasType(x, Dog) && HasProperty(x, Smiling)").unwrap();
        assert!(!eval(&q, img, &album).unwrap());
        // the face has no emotion field: false rather than unknown
        let e = parse("exists x. HasEmotion(x, Happy)").unwrap();
        assert!(!eval(&e, img, &album).unwrap());
        assert!(eval(&parse("exists x. !HasEmotion(x, Happy)").unwrap(), img, &album).unwrap());
    }

    #[test]
    fn relation_needs_distinct_objects() {
        let img = ImageAnnotation::new("i", vec![DetectedObject::thing("o1", "dog", 0.9, bb(0.1, 0.1, 0.1, 0.1))]);
        let album = album_of(vec![img]);
        let q = parse("exists x. exists y. HasRelation(x, y, NextTo)").unwrap();
        assert!(!eval(&q, album.image("i").unwrap(), &album).unwrap());
        let inside = parse("exists x. exists y. HasRelation(x, y, Inside)").unwrap();
        assert!(!eval(&inside, album.image("i").unwrap(), &album).unwrap());
    }

    #[test]
    fn unknown_constants_and_holes_are_errors() {
        let album = album_of(vec![bridesmaids()]);
        let img = album.image("bridesmaids").unwrap();
        assert_eq!(
            eval(&parse("exists x. HasType(x, Giraffe)").unwrap(), img, &album),
            Err(EvalError::UnknownConstant { slot: Slot::TypeConst, constant: "giraffe".into() })
        );
        assert!(matches!(
            eval(&parse("exists x. exists y. HasRelation(x, y, Holding)").unwrap(), img, &album),
            Err(EvalError::UnknownConstant { slot: Slot::RelationConst, .. })
        ));
        let sketch = crate::dsl::parse_with_holes(
            "exists x. HasType(x, Giraffe)",
            album.vocabulary(),
        )
        .unwrap();
        assert_eq!(eval(sketch.expr(), img, &album), Err(EvalError::HasHoles));
    }

    fn transportation() -> Album {
        let car = |id: &str, x| DetectedObject::thing(id, "car", 0.9, bb(x, 0.5, 0.2, 0.2));
        let bike = |id: &str, x| DetectedObject::thing(id, "bicycle", 0.9, bb(x, 0.5, 0.1, 0.2));
        let person = |id: &str, x| DetectedObject::thing(id, "person", 0.9, bb(x, 0.3, 0.1, 0.5));
        album_of(vec![
            ImageAnnotation::new("t1", vec![car("o1", 0.1), bike("o2", 0.6)]),
            ImageAnnotation::new("t2", vec![car("o1", 0.1), person("o2", 0.5)]),
            ImageAnnotation::new("t3", vec![bike("o1", 0.2), person("o2", 0.5), car("o3", 0.7)]),
            ImageAnnotation::new("t4", vec![bike("o1", 0.2), person("o2", 0.5)]),
        ])
    }

    #[test]
    fn search_returns_matching_ids_in_order() {
        let album = transportation();
        let q = parse("exists x. exists y. HasType(x, Car) && HasType(y, Bicycle)").unwrap();
        assert_eq!(search(&q, &album).unwrap(), ["t1", "t3"]);
        let all = parse("forall x. HasType(x, Face) || !HasType(x, Face)").unwrap();
        assert_eq!(search(&all, &album).unwrap(), ["t1", "t2", "t3", "t4"]);
        let none = parse("exists x. HasType(x, Car) && !HasType(x, Car)").unwrap();
        assert!(search(&none, &album).unwrap().is_empty());
    }

    #[test]
    fn negated_universal_equals_existential_negation() {
        let album = transportation();
        for body in ["HasType(x, Car)", "HasType(x, Person) -> exists y. HasType(y, Bicycle) && HasRelation(x, y, Right)"] {
            let a = parse(&format!("!(forall x. {body})")).unwrap();
            let b = parse(&format!("exists x. !({body})")).unwrap();
            assert_eq!(search(&a, &album).unwrap(), search(&b, &album).unwrap(), "{body}");
        }
    }
}
