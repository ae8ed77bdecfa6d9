//! Brute-force reference semantics.
//!
//! Every quantifier occurrence gets its own coordinate, and a formula
//! denotes the set of all `n^k` environments that satisfy it. Geometry is
//! recomputed in integer grid units, so ties are exact.

use photoscout::annotations::{Album, BBox, DetectedObject, ImageAnnotation, ObjectKind, TagTarget};
use photoscout::dsl::{Constant, Predicate, QueryExpr, Relation, Term};
use photoscout::synthesis::ExampleSet;

/// Grid resolution: every box coordinate must be a multiple of `1/GRID`.
pub const GRID: i64 = 40;

#[derive(Debug, Clone, Copy)]
struct Cell {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

fn units(v: f64) -> i64 {
    let u = (v * GRID as f64).round();
    assert!((v * GRID as f64 - u).abs() < 1e-6, "{v} is off the 1/{GRID} grid");
    u as i64
}

impl Cell {
    fn of(b: &BBox) -> Self {
        Cell {
            x: units(b.x),
            y: units(b.y),
            w: units(b.w),
            h: units(b.h),
        }
    }

    fn h_overlap(&self, o: &Cell) -> i64 {
        ((self.x + self.w).min(o.x + o.w) - self.x.max(o.x)).max(0)
    }

    fn v_overlap(&self, o: &Cell) -> i64 {
        ((self.y + self.h).min(o.y + o.h) - self.y.max(o.y)).max(0)
    }

    fn h_gap(&self, o: &Cell) -> i64 {
        (self.x.max(o.x) - (self.x + self.w).min(o.x + o.w)).max(0)
    }
}

/// `rel` between two boxes with the default thresholds, in exact arithmetic.
pub fn relation_holds(rel: &str, a: &BBox, b: &BBox) -> bool {
    let (a, b) = (Cell::of(a), Cell::of(b));
    // doubled centres stay integral
    let (acx, bcx) = (2 * a.x + a.w, 2 * b.x + b.w);
    let (acy, bcy) = (2 * a.y + a.h, 2 * b.y + b.h);
    let stacked = 4 * a.h_overlap(&b) >= a.w.min(b.w);
    match rel {
        "left" => acx < bcx,
        "right" => acx > bcx,
        "above" => acy < bcy && stacked,
        "below" => acy > bcy && stacked,
        "nextto" => a.v_overlap(&b) > 0 && (a.h_overlap(&b) > 0 || 10 * a.h_gap(&b) <= GRID),
        "inside" => 10 * a.h_overlap(&b) * a.v_overlap(&b) >= 9 * a.w * a.h,
        "contains" => relation_holds("inside", &unscale(&b), &unscale(&a)),
        other => panic!("unknown relation {other}"),
    }
}

fn unscale(c: &Cell) -> BBox {
    let g = GRID as f64;
    BBox {
        x: c.x as f64 / g,
        y: c.y as f64 / g,
        w: c.w as f64 / g,
        h: c.h as f64 / g,
    }
}

fn has_type(o: &DetectedObject, c: &Constant, image_id: &str, album: &Album) -> bool {
    let face = match &o.kind {
        ObjectKind::Face(f) => Some(f),
        _ => None,
    };
    if c.as_str() == "face" {
        return face.is_some();
    }
    match album.tags().get(c) {
        Some(TagTarget::FaceCluster(k)) => face.is_some_and(|f| &f.cluster == k),
        Some(TagTarget::Objects(refs)) => refs
            .iter()
            .any(|r| r.image_id == image_id && r.object_id == o.object_id),
        None => matches!(&o.kind, ObjectKind::Thing { label } if label == c),
    }
}

fn atom(p: &Predicate, objs: &[&DetectedObject], image_id: &str, album: &Album) -> bool {
    let Term::Const(c) = p.value() else {
        panic!("oracle needs hole-free programs")
    };
    let a = objs[0];
    match p.relation() {
        Relation::HasType => has_type(a, c, image_id, album),
        Relation::HasProperty => match &a.kind {
            ObjectKind::Face(f) => f.properties.contains(c),
            _ => false,
        },
        Relation::HasEmotion => match &a.kind {
            ObjectKind::Face(f) => f.emotion.as_ref() == Some(c),
            _ => false,
        },
        Relation::HasRelation => {
            let b = objs[1];
            !std::ptr::eq(a, b) && relation_holds(c.as_str(), &a.bbox, &b.bbox)
        }
    }
}

fn quantifiers(e: &QueryExpr) -> usize {
    match e {
        QueryExpr::Pred(_) => 0,
        QueryExpr::Not(b) => quantifiers(b),
        QueryExpr::Exists(_, b) | QueryExpr::Forall(_, b) => 1 + quantifiers(b),
        QueryExpr::And(l, r) | QueryExpr::Or(l, r) | QueryExpr::Implies(l, r) => quantifiers(l) + quantifiers(r),
    }
}

/// Truth value over an empty quantifier domain, where no atom is reachable.
fn vacuous(e: &QueryExpr) -> bool {
    match e {
        QueryExpr::Exists(..) => false,
        QueryExpr::Forall(..) => true,
        QueryExpr::Not(b) => !vacuous(b),
        QueryExpr::And(l, r) => vacuous(l) && vacuous(r),
        QueryExpr::Or(l, r) => vacuous(l) || vacuous(r),
        QueryExpr::Implies(l, r) => !vacuous(l) || vacuous(r),
        QueryExpr::Pred(_) => panic!("free variable in a closed program"),
    }
}

struct Space<'a> {
    domain: Vec<&'a DetectedObject>,
    image_id: &'a str,
    album: &'a Album,
    /// `n^k` environments; coordinate `s` of environment `i` is `(i / n^s) % n`.
    size: usize,
    next_slot: usize,
}

impl Space<'_> {
    fn coord(&self, env: usize, slot: usize) -> usize {
        (env / self.domain.len().pow(slot as u32)) % self.domain.len()
    }

    fn sat(&mut self, e: &QueryExpr, scope: &mut Vec<(String, usize)>) -> Vec<bool> {
        match e {
            QueryExpr::Pred(p) => {
                let slots: Vec<usize> = p
                    .args()
                    .iter()
                    .filter_map(|t| match t {
                        Term::Var(v) => Some(
                            scope
                                .iter()
                                .rev()
                                .find(|(n, _)| n == v.as_str())
                                .expect("closed program")
                                .1,
                        ),
                        _ => None,
                    })
                    .collect();
                (0..self.size)
                    .map(|env| {
                        let objs: Vec<_> = slots.iter().map(|&s| self.domain[self.coord(env, s)]).collect();
                        atom(p, &objs, self.image_id, self.album)
                    })
                    .collect()
            }
            QueryExpr::Not(b) => self.sat(b, scope).into_iter().map(|v| !v).collect(),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) | QueryExpr::Implies(l, r) => {
                let (l, r) = (self.sat(l, scope), self.sat(r, scope));
                l.into_iter()
                    .zip(r)
                    .map(|(a, b)| match e {
                        QueryExpr::And(..) => a && b,
                        QueryExpr::Or(..) => a || b,
                        _ => !a || b,
                    })
                    .collect()
            }
            QueryExpr::Exists(v, b) | QueryExpr::Forall(v, b) => {
                let slot = self.next_slot;
                self.next_slot += 1;
                scope.push((v.as_str().to_owned(), slot));
                let body = self.sat(b, scope);
                scope.pop();
                let any = matches!(e, QueryExpr::Exists(..));
                let n = self.domain.len();
                let stride = n.pow(slot as u32);
                (0..self.size)
                    .map(|env| {
                        let base = env - self.coord(env, slot) * stride;
                        let mut values = (0..n).map(|d| body[base + d * stride]);
                        if any {
                            values.any(|x| x)
                        } else {
                            values.all(|x| x)
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Truth of a closed, hole-free program on one image.
pub fn oracle_eval(program: &QueryExpr, image: &ImageAnnotation, album: &Album) -> bool {
    let domain: Vec<&DetectedObject> = image
        .objects
        .iter()
        .filter(|o| o.confidence >= album.confidence_threshold())
        .collect();
    if domain.is_empty() {
        return vacuous(program);
    }
    let k = quantifiers(program);
    let mut space = Space {
        size: domain.len().pow(k as u32),
        domain,
        image_id: &image.image_id,
        album,
        next_slot: 0,
    };
    let sat = space.sat(program, &mut Vec::new());
    let first = sat[0];
    assert!(sat.iter().all(|&v| v == first), "closed programs denote a constant");
    first
}

/// Sorted ids of the accepted images.
pub fn oracle_search(program: &QueryExpr, album: &Album) -> Vec<String> {
    let mut ids: Vec<String> = album
        .images()
        .filter(|img| oracle_eval(program, img, album))
        .map(|img| img.image_id.clone())
        .collect();
    ids.sort();
    ids
}

pub fn oracle_consistent(program: &QueryExpr, examples: &ExampleSet, album: &Album) -> bool {
    examples.positive().iter().all(|id| oracle_eval(program, album.image(id).expect("labelled image"), album))
        && examples
            .negative()
            .iter()
            .all(|id| !oracle_eval(program, album.image(id).expect("labelled image"), album))
}

#[cfg(test)]
mod tests {
    use super::*;
    use photoscout::dsl::parse;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn hand_geometry() {
        assert!(relation_holds("left", &b(0.1, 0.1, 0.2, 0.2), &b(0.5, 0.1, 0.2, 0.2)));
        assert!(relation_holds("above", &b(0.4, 0.2, 0.1, 0.1), &b(0.4, 0.5, 0.1, 0.2)));
        assert!(relation_holds("nextto", &b(0.0, 0.0, 0.2, 0.2), &b(0.3, 0.1, 0.2, 0.2)));
        assert!(!relation_holds("nextto", &b(0.0, 0.0, 0.2, 0.2), &b(0.325, 0.1, 0.2, 0.2)));
        assert!(relation_holds("contains", &b(0.0, 0.0, 0.5, 0.5), &b(0.1, 0.1, 0.2, 0.2)));
    }

    #[test]
    fn empty_and_vacuous_domains() {
        let img = ImageAnnotation::new("e", vec![DetectedObject::thing("o", "dog", 0.2, b(0.0, 0.0, 0.1, 0.1))]);
        let album = Album::new("a", vec![img.clone()]).unwrap();
        assert!(oracle_eval(&parse("forall x. HasType(x, dog)").unwrap(), &img, &album));
        assert!(!oracle_eval(&parse("exists x. HasType(x, dog)").unwrap(), &img, &album));
        assert!(oracle_eval(&parse("!(exists x. HasType(x, dog)) && forall y. HasType(y, cat)").unwrap(), &img, &album));
    }

    #[test]
    fn relations_need_distinct_objects() {
        let img = ImageAnnotation::new("i", vec![DetectedObject::thing("o", "dog", 0.9, b(0.0, 0.0, 0.5, 0.5))]);
        let album = Album::new("a", vec![img.clone()]).unwrap();
        assert!(!oracle_eval(&parse("exists x. exists y. HasRelation(x, y, Inside)").unwrap(), &img, &album));
    }
}
