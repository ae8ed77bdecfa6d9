//! Seeded random albums, programs, sketches and example sets.

use std::collections::{BTreeMap, BTreeSet};

use photoscout::annotations::{Album, BBox, DetectedObject, ImageAnnotation, ObjectRef, TagTarget};
use photoscout::dsl::{Constant, Hole, HoleId, KnownVocabulary, Predicate, QueryExpr, Relation, Sketch, Slot, Term, Variable};
use photoscout::synthesis::ExampleSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::oracle_eval;

pub const LABELS: [&str; 5] = ["dog", "cat", "flower", "car", "guitar"];
pub const CLUSTERS: [&str; 3] = ["c1", "c2", "c3"];
const PROPERTIES: [&str; 4] = ["smiling", "eyesopen", "beard", "sunglasses"];
const EMOTIONS: [&str; 3] = ["happy", "sad", "calm"];
/// Coordinates are multiples of `1/STEP`, so spatial ties are common.
const STEP: u32 = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bbox(rng: &mut impl Rng) -> BBox {
    let step = STEP as f64;
    let w = rng.gen_range(1..=8);
    let h = rng.gen_range(1..=8);
    let x = rng.gen_range(0..=STEP - w);
    let y = rng.gen_range(0..=STEP - h);
    BBox::new(x as f64 / step, y as f64 / step, w as f64 / step, h as f64 / step).expect("grid box fits")
}

pub fn random_object(rng: &mut impl Rng, object_id: &str) -> DetectedObject {
    // a quarter of detections fall under the default threshold
    let confidence = [0.3, 0.6, 0.8, 0.95][rng.gen_range(0..4)];
    let bbox = random_bbox(rng);
    if rng.gen_bool(0.45) {
        let cluster = CLUSTERS.choose(rng).expect("nonempty");
        let props: Vec<&str> = PROPERTIES.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        let face = DetectedObject::face(object_id, cluster, confidence, bbox).with_properties(props);
        if rng.gen_bool(0.6) {
            face.with_emotion(EMOTIONS.choose(rng).expect("nonempty"))
        } else {
            face
        }
    } else {
        DetectedObject::thing(object_id, LABELS.choose(rng).expect("nonempty"), confidence, bbox)
    }
}

pub fn random_image(rng: &mut impl Rng, image_id: &str, max_objects: usize) -> ImageAnnotation {
    let n = rng.gen_range(0..=max_objects);
    let objects = (0..n).map(|i| random_object(rng, &format!("o{i}"))).collect();
    ImageAnnotation::new(image_id, objects)
}

/// An album of `images` random images. When the objects allow it, `alice`
/// names a face cluster and `red car` (which needs quoting) names some
/// things.
pub fn random_album(rng: &mut impl Rng, images: usize, max_objects: usize) -> Album {
    let imgs: Vec<ImageAnnotation> = (0..images)
        .map(|i| random_image(rng, &format!("img_{i:02}"), max_objects))
        .collect();
    let things: Vec<ObjectRef> = imgs
        .iter()
        .flat_map(|img| {
            img.objects.iter().filter(|o| !o.is_face()).map(|o| ObjectRef {
                image_id: img.image_id.clone(),
                object_id: o.object_id.clone(),
            })
        })
        .collect();
    let mut album = Album::new("random", imgs).expect("generated ids are unique");
    let first_cluster = album.face_clusters().into_iter().next().map(str::to_owned);
    if let Some(cluster) = first_cluster {
        album.register_tag("alice", TagTarget::FaceCluster(cluster)).expect("cluster exists");
    }
    let tagged: BTreeSet<ObjectRef> = things.into_iter().filter(|_| rng.gen_bool(0.3)).collect();
    if !tagged.is_empty() {
        album.register_tag("red car", TagTarget::Objects(tagged)).expect("objects exist");
    }
    album
}

/// Same images and tags, visited in a different order.
pub fn reordered(album: &Album, rng: &mut impl Rng) -> Album {
    let mut imgs: Vec<ImageAnnotation> = album.images().cloned().collect();
    imgs.shuffle(rng);
    let mut copy = Album::new(album.album_id(), imgs).expect("same ids");
    for (name, target) in album.tags().iter() {
        copy.register_tag(name.as_str(), target.clone()).expect("same targets");
    }
    copy.set_confidence_threshold(album.confidence_threshold()).expect("valid threshold");
    copy
}

fn var(name: &str) -> Term {
    Term::Var(Variable::new(name).expect("valid variable"))
}

fn pick(rng: &mut impl Rng, vocab: &KnownVocabulary, slot: Slot) -> Constant {
    vocab.candidates(slot).choose(rng).expect("every slot has candidates").clone()
}

fn random_atom(rng: &mut impl Rng, vocab: &KnownVocabulary, vars: &[&str]) -> QueryExpr {
    let subject = *vars.choose(rng).expect("atoms live under a quantifier");
    let binary_weight = if vars.len() > 1 { 30 } else { 3 };
    let roll = rng.gen_range(0..(70 + binary_weight));
    let (relation, args) = if roll < 35 {
        (Relation::HasType, vec![var(subject)])
    } else if roll < 55 {
        (Relation::HasProperty, vec![var(subject)])
    } else if roll < 70 {
        (Relation::HasEmotion, vec![var(subject)])
    } else {
        let object = *vars.choose(rng).expect("nonempty");
        (Relation::HasRelation, vec![var(subject), var(object)])
    };
    let mut args = args;
    args.push(Term::Const(pick(rng, vocab, relation.slot())));
    QueryExpr::Pred(Predicate::new(relation, args).expect("well-formed atom"))
}

fn random_connective(rng: &mut impl Rng, atoms: usize, vocab: &KnownVocabulary, vars: &[&str]) -> QueryExpr {
    let e = if atoms <= 1 {
        random_atom(rng, vocab, vars)
    } else {
        let left = rng.gen_range(1..atoms);
        let l = random_connective(rng, left, vocab, vars);
        let r = random_connective(rng, atoms - left, vocab, vars);
        match rng.gen_range(0..3) {
            0 => QueryExpr::and(l, r),
            1 => QueryExpr::or(l, r),
            _ => QueryExpr::implies(l, r),
        }
    };
    if rng.gen_bool(0.2) {
        QueryExpr::not(e)
    } else {
        e
    }
}

fn quantify(rng: &mut impl Rng, v: &str, body: QueryExpr) -> QueryExpr {
    if rng.gen_bool(0.5) {
        QueryExpr::exists(v, body)
    } else {
        QueryExpr::forall(v, body)
    }
}

/// A closed program with at most two quantifiers and four atoms, using only
/// constants from `vocab`.
pub fn random_program(rng: &mut impl Rng, vocab: &KnownVocabulary) -> QueryExpr {
    let atoms = rng.gen_range(1..=4);
    let program = match (rng.gen_range(0..4), atoms) {
        (0, _) => {
            let body = random_connective(rng, atoms, vocab, &["x"]);
            quantify(rng, "x", body)
        }
        (1, a) if a >= 2 => {
            let left = rng.gen_range(1..a);
            let outer = random_connective(rng, left, vocab, &["x"]);
            let inner = random_connective(rng, a - left, vocab, &["x", "y"]);
            let inner = quantify(rng, "y", inner);
            let body = match rng.gen_range(0..3) {
                0 => QueryExpr::and(outer, inner),
                1 => QueryExpr::or(outer, inner),
                _ => QueryExpr::implies(outer, inner),
            };
            quantify(rng, "x", body)
        }
        (2, a) if a >= 2 => {
            let left = rng.gen_range(1..a);
            let l = random_connective(rng, left, vocab, &["x"]);
            let l = quantify(rng, "x", l);
            let r = random_connective(rng, a - left, vocab, &["y"]);
            let r = quantify(rng, "y", r);
            if rng.gen_bool(0.5) {
                QueryExpr::and(l, r)
            } else {
                QueryExpr::or(l, r)
            }
        }
        _ => {
            let body = random_connective(rng, atoms, vocab, &["x", "y"]);
            let inner = quantify(rng, "y", body);
            quantify(rng, "x", inner)
        }
    };
    if rng.gen_bool(0.15) {
        QueryExpr::not(program)
    } else {
        program
    }
}

/// Replaces the constants at the chosen predicate positions (left to right)
/// with holes numbered from 1.
pub fn punch_holes(program: &QueryExpr, positions: &BTreeSet<usize>) -> Sketch {
    fn walk(e: &QueryExpr, positions: &BTreeSet<usize>, next: &mut usize, holes: &mut Vec<Hole>) -> QueryExpr {
        match e {
            QueryExpr::Pred(p) => {
                let index = *next;
                *next += 1;
                if !positions.contains(&index) {
                    return e.clone();
                }
                let Term::Const(c) = p.value() else {
                    return e.clone();
                };
                let id = HoleId(holes.len() as u32 + 1);
                holes.push(Hole {
                    id,
                    origin_token: c.as_str().to_owned(),
                    slot: p.relation().slot(),
                    position: index,
                });
                let mut args = p.args().to_vec();
                *args.last_mut().expect("nonempty") = Term::Hole(id);
                QueryExpr::Pred(Predicate::new(p.relation(), args).expect("same shape"))
            }
            QueryExpr::Not(b) => QueryExpr::not(walk(b, positions, next, holes)),
            QueryExpr::Exists(v, b) => QueryExpr::exists(v.as_str(), walk(b, positions, next, holes)),
            QueryExpr::Forall(v, b) => QueryExpr::forall(v.as_str(), walk(b, positions, next, holes)),
            QueryExpr::And(l, r) => {
                let l = walk(l, positions, next, holes);
                QueryExpr::and(l, walk(r, positions, next, holes))
            }
            QueryExpr::Or(l, r) => {
                let l = walk(l, positions, next, holes);
                QueryExpr::or(l, walk(r, positions, next, holes))
            }
            QueryExpr::Implies(l, r) => {
                let l = walk(l, positions, next, holes);
                QueryExpr::implies(l, walk(r, positions, next, holes))
            }
        }
    }
    let mut holes = Vec::new();
    let expr = walk(program, positions, &mut 0, &mut holes);
    Sketch::new(expr, holes).expect("holes index the expression")
}

fn predicate_count(e: &QueryExpr) -> usize {
    let mut n = 0;
    e.for_each_pred(&mut |_| n += 1);
    n
}

/// `program` with up to `max_holes` of its constants replaced by holes.
pub fn random_sketch(rng: &mut impl Rng, program: &QueryExpr, max_holes: usize) -> Sketch {
    let n = predicate_count(program);
    let k = rng.gen_range(0..=max_holes.min(n));
    let positions: BTreeSet<usize> = rand::seq::index::sample(rng, n, k).into_iter().collect();
    punch_holes(program, &positions)
}

/// One synthesis problem: sketches, labelled examples and the album they
/// refer to.
#[derive(Debug, Clone)]
pub struct SynthesisCase {
    pub album: Album,
    pub sketches: Vec<Sketch>,
    pub examples: ExampleSet,
    /// The program the labels were drawn from, when they were.
    pub target: Option<QueryExpr>,
}

/// Up to three sketches of at most three holes each, with one to four
/// labelled images. Usually the labels follow the first sketch's source
/// program, so a consistent completion exists.
pub fn random_synthesis_case(rng: &mut impl Rng) -> SynthesisCase {
    let album = random_album(rng, 8, 5);
    let vocab = album.vocabulary().clone();
    let target = random_program(rng, &vocab);
    let mut sketches = vec![random_sketch(rng, &target, 3)];
    for _ in 0..rng.gen_range(0..=2) {
        let other = random_program(rng, &vocab);
        sketches.push(random_sketch(rng, &other, 3));
    }
    let ids: Vec<String> = album.image_ids().map(str::to_owned).collect();
    let count = rng.gen_range(1..=4);
    let labelled: Vec<&String> = ids.choose_multiple(rng, count).collect();
    let follow_target = rng.gen_bool(0.75);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for id in labelled {
        let positive = if follow_target {
            oracle_eval(&target, album.image(id).expect("listed"), &album)
        } else {
            rng.gen_bool(0.5)
        };
        if positive {
            pos.push(id.clone());
        } else {
            neg.push(id.clone());
        }
    }
    SynthesisCase {
        examples: ExampleSet::new(pos, neg).expect("each image labelled once"),
        target: follow_target.then_some(target),
        album,
        sketches,
    }
}

/// Every completion of every sketch over the album vocabulary, by plain
/// Cartesian product.
pub fn all_completions(sketches: &[Sketch], vocab: &KnownVocabulary) -> Vec<QueryExpr> {
    let mut out = Vec::new();
    for sketch in sketches {
        let mut partial: Vec<BTreeMap<HoleId, Constant>> = vec![BTreeMap::new()];
        for hole in sketch.holes() {
            partial = partial
                .into_iter()
                .flat_map(|m| {
                    vocab.candidates(hole.slot).into_iter().map(move |c| {
                        let mut m = m.clone();
                        m.insert(hole.id, c);
                        m
                    })
                })
                .collect();
        }
        for m in partial {
            out.push(sketch.expr().fill_holes(&|id| m.get(&id).cloned()));
        }
    }
    out
}
