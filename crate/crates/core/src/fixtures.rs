//! Deterministic example albums with known answers.
//!
//! Every generator is seeded, so ids, boxes and ground truth are identical
//! across runs and platforms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::{Album, BBox, DetectedObject, ImageAnnotation};
use crate::dsl::parse;
use crate::evaluator::search;

pub const BRIDE_CLUSTER: &str = "c01";
pub const GROOM_CLUSTER: &str = "c02";

/// The query of the wedding walkthrough.
pub const WEDDING_QUERY: &str = "Alice next to Bob holding flowers";
pub const WEDDING_SEED: u64 = 0x5eed_0352;
pub const WEDDING_SIZE: usize = 352;

pub const FESTIVAL_SEED: u64 = 0xf357_0400;

/// Recorded model output for "Alice is holding flowers": `Alice` is not a
/// detector label and `Holding` not a relation, so both become holes.
pub const FIG1_REPLAY: &str =
    "exists x. exists y. HasType(x, Alice) && HasType(y, Flowers) && HasRelation(x, y, Holding)\n";

/// Recorded model output for "a guitar to the left of a mic". Each program
/// leaves two holes; the prose line does not parse and is skipped.
pub const FESTIVAL_REPLAY: &str = "\
exists x. exists y. HasType(x, Guitar) && HasType(y, Mic) && HasRelation(x, y, LeftOf)
Sure! The guitar is left of the microphone.
exists x. exists y. HasType(x, Axe) && HasType(y, Microphone) && HasRelation(x, y, Beside)
";

pub const FESTIVAL_QUERY: &str = "a guitar to the left of a mic";
pub const FESTIVAL_SIZE: usize = 400;

/// Builder that numbers objects within one image.
struct Scene {
    id: String,
    objects: Vec<DetectedObject>,
}

fn bbox(x: f64, y: f64, w: f64, h: f64) -> BBox {
    let x = x.clamp(0.0, 1.0 - w);
    let y = y.clamp(0.0, 1.0 - h);
    BBox::new(x, y, w, h).expect("fixture boxes are clamped into the frame")
}

impl Scene {
    fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            objects: Vec::new(),
        }
    }

    fn next_id(&self) -> String {
        format!("o{}", self.objects.len() + 1)
    }

    fn face(&mut self, cluster: &str, conf: f64, b: BBox, props: &[&str]) -> &mut Self {
        let id = self.next_id();
        self.objects
            .push(DetectedObject::face(&id, cluster, conf, b).with_properties(props.iter().copied()));
        self
    }

    fn thing(&mut self, label: &str, conf: f64, b: BBox) -> &mut Self {
        let id = self.next_id();
        self.objects.push(DetectedObject::thing(&id, label, conf, b));
        self
    }

    fn build(self) -> ImageAnnotation {
        ImageAnnotation::new(&self.id, self.objects)
    }
}

/// Four wedding photos. In the first three the bride's face (cluster
/// `c01`) is directly above a bouquet she holds and next to the groom
/// (`c02`); in the fourth the only flowers are the groom's boutonniere,
/// beside but not below her face.
pub fn fig1_album() -> Album {
    let mut images = Vec::new();
    for (k, dx) in [0.0, 0.12, -0.08].into_iter().enumerate() {
        let mut s = Scene::new(format!("fig1_{}", k + 1));
        s.face(BRIDE_CLUSTER, 0.99, bbox(0.40 + dx, 0.20, 0.08, 0.10), &["smiling", "eyesopen"])
            .face(GROOM_CLUSTER, 0.98, bbox(0.50 + dx, 0.21, 0.08, 0.10), &["smiling"])
            .thing("flower", 0.93, bbox(0.39 + dx, 0.28, 0.12, 0.12))
            .thing("person", 0.97, bbox(0.36 + dx, 0.18, 0.16, 0.75))
            .thing("person", 0.96, bbox(0.48 + dx, 0.19, 0.16, 0.76));
        images.push(s.build());
    }
    let mut s = Scene::new("fig1_4");
    s.face(BRIDE_CLUSTER, 0.99, bbox(0.30, 0.30, 0.08, 0.10), &["smiling"])
        .face(GROOM_CLUSTER, 0.97, bbox(0.44, 0.22, 0.08, 0.10), &["eyesopen"])
        .thing("flower", 0.88, bbox(0.45, 0.35, 0.04, 0.05))
        .thing("person", 0.97, bbox(0.26, 0.28, 0.16, 0.70))
        .thing("person", 0.95, bbox(0.41, 0.20, 0.16, 0.78));
    images.push(s.build());
    Album::new("fig1", images).expect("fixture ids are unique")
}

/// Four street scenes: car+bicycle, car+person, all three, bicycle+person.
pub fn transportation_album() -> Album {
    let scenes: [(&str, &[&str]); 4] = [
        ("t1", &["car", "bicycle"]),
        ("t2", &["car", "person"]),
        ("t3", &["bicycle", "person", "car"]),
        ("t4", &["bicycle", "person"]),
    ];
    let images = scenes
        .iter()
        .map(|(id, labels)| {
            let mut s = Scene::new(*id);
            for (k, label) in labels.iter().enumerate() {
                s.thing(label, 0.9, bbox(0.05 + 0.3 * k as f64, 0.4, 0.2, 0.3));
            }
            s.build()
        })
        .collect();
    Album::new("transportation", images).expect("fixture ids are unique")
}

/// How a wedding image was composed; only `Target` images satisfy the
/// walkthrough query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WeddingKind {
    /// Bride beside groom, bouquet directly under her face.
    Target,
    /// Bride beside groom, boutonniere under his face only.
    Boutonniere,
    /// Bride holding flowers, groom far away.
    Apart,
    /// Bride with flowers, groom absent.
    BrideAlone,
    /// Guests holding flowers, bride absent.
    Guests,
    /// Groom without bride or flowers.
    GroomAlone,
    /// Couple side by side, no flowers.
    NoFlowers,
    /// Couple side by side, flowers off to one side.
    VaseAside,
    /// Target layout but the bride's face is a low-confidence detection.
    Blurry,
}

const WEDDING_MIX: [(WeddingKind, usize); 9] = [
    (WeddingKind::Target, 48),
    (WeddingKind::Boutonniere, 40),
    (WeddingKind::Apart, 40),
    (WeddingKind::BrideAlone, 40),
    (WeddingKind::Guests, 60),
    (WeddingKind::GroomAlone, 50),
    (WeddingKind::NoFlowers, 30),
    (WeddingKind::VaseAside, 30),
    (WeddingKind::Blurry, 14),
];

#[derive(Debug, Clone)]
pub struct WeddingFixture {
    pub album: Album,
    /// Image ids the walkthrough must return, sorted.
    pub ground_truth: Vec<String>,
    pub kinds: Vec<(String, WeddingKind)>,
    /// The example images the walkthrough labels.
    pub positive: String,
    pub negative: String,
}

struct Couple {
    bride: BBox,
    groom: BBox,
}

fn face_box(rng: &mut ChaCha8Rng, x: f64, y: f64) -> BBox {
    bbox(x, y, rng.gen_range(0.06..0.09), rng.gen_range(0.08..0.11))
}

/// Bride and groom faces touching or nearly so, at similar heights.
fn couple(rng: &mut ChaCha8Rng) -> Couple {
    let (fx, fy) = (rng.gen_range(0.10..0.55), rng.gen_range(0.10..0.35));
    let bride = face_box(rng, fx, fy);
    let gap = rng.gen_range(0.0..0.06);
    let dy = rng.gen_range(-0.03..0.03);
    let (fx, fy) = (bride.right_edge() + gap, bride.y + dy);
    let groom = face_box(rng, fx, fy);
    Couple { bride, groom }
}

/// A bouquet centered under `face`.
fn bouquet_under(rng: &mut ChaCha8Rng, face: &BBox) -> BBox {
    let w = rng.gen_range(0.10..0.14);
    let x = face.cx() - w / 2.0 + rng.gen_range(-0.02..0.02);
    bbox(x, face.bottom_edge() + rng.gen_range(0.02..0.12), w, rng.gen_range(0.08..0.14))
}

/// Up to `max - 1` guest faces with x in `band`.
fn guest_faces(rng: &mut ChaCha8Rng, s: &mut Scene, max: usize, band: (f64, f64)) {
    for _ in 0..rng.gen_range(0..max) {
        let cluster = format!("c{:02}", rng.gen_range(3..21));
        let (fx, fy) = (rng.gen_range(band.0..band.1), rng.gen_range(0.05..0.30));
        let b = face_box(rng, fx, fy);
        let props: &[&str] = if rng.gen_bool(0.5) { &["smiling"] } else { &[] };
        s.face(&cluster, rng.gen_range(0.6..0.99), b, props);
    }
}

/// Non-flower scenery that never affects the walkthrough query.
fn scenery(rng: &mut ChaCha8Rng, s: &mut Scene) {
    const PROPS: [&str; 6] = ["chair", "table", "cake", "glass", "person", "tree"];
    for _ in 0..rng.gen_range(0..4) {
        let label = PROPS[rng.gen_range(0..PROPS.len())];
        let b = bbox(rng.gen_range(0.0..0.8), rng.gen_range(0.45..0.8), rng.gen_range(0.05..0.2), rng.gen_range(0.05..0.2));
        s.thing(label, rng.gen_range(0.55..0.99), b);
    }
}

fn wedding_image(rng: &mut ChaCha8Rng, id: &str, kind: WeddingKind) -> ImageAnnotation {
    let mut s = Scene::new(id);
    let conf = rng.gen_range(0.8..0.99);
    match kind {
        WeddingKind::Target | WeddingKind::Blurry => {
            let c = couple(rng);
            let bride_conf = if kind == WeddingKind::Blurry { rng.gen_range(0.2..0.45) } else { conf };
            let flowers = bouquet_under(rng, &c.bride);
            s.face(BRIDE_CLUSTER, bride_conf, c.bride, &["smiling"])
                .face(GROOM_CLUSTER, conf, c.groom, &[])
                .thing("flower", conf, flowers);
        }
        WeddingKind::Boutonniere => {
            let c = couple(rng);
            let w = rng.gen_range(0.03..0.04);
            let b = bbox(c.groom.cx() - w / 2.0, c.groom.bottom_edge() + rng.gen_range(0.03..0.08), w, 0.04);
            s.face(BRIDE_CLUSTER, conf, c.bride, &["smiling"])
                .face(GROOM_CLUSTER, conf, c.groom, &["smiling"])
                .thing("flower", conf, b);
        }
        WeddingKind::Apart => {
            let (fx, fy) = (rng.gen_range(0.05..0.30), rng.gen_range(0.10..0.35));
            let bride = face_box(rng, fx, fy);
            let (fx, fy) = (bride.right_edge() + rng.gen_range(0.25..0.45), bride.y);
            let groom = face_box(rng, fx, fy);
            let flowers = bouquet_under(rng, &bride);
            s.face(BRIDE_CLUSTER, conf, bride, &[])
                .face(GROOM_CLUSTER, conf, groom, &[])
                .thing("flower", conf, flowers);
        }
        WeddingKind::BrideAlone => {
            let (fx, fy) = (rng.gen_range(0.1..0.7), rng.gen_range(0.1..0.35));
            let bride = face_box(rng, fx, fy);
            let flowers = bouquet_under(rng, &bride);
            s.face(BRIDE_CLUSTER, conf, bride, &["smiling", "eyesopen"]).thing("flower", conf, flowers);
            guest_faces(rng, &mut s, 2, (0.82, 0.9));
        }
        WeddingKind::Guests => {
            let n = rng.gen_range(1..4);
            for k in 0..n {
                let cluster = format!("c{:02}", rng.gen_range(3..21));
                let (fx, fy) = (0.05 + 0.3 * k as f64, rng.gen_range(0.1..0.3));
                let face = face_box(rng, fx, fy);
                let flowers = bouquet_under(rng, &face);
                s.face(&cluster, conf, face, &["smiling"]).thing("flower", conf, flowers);
            }
            if rng.gen_bool(0.5) {
                let groom = face_box(rng, 0.9, 0.1);
                s.face(GROOM_CLUSTER, conf, groom, &[]);
            }
        }
        WeddingKind::GroomAlone => {
            let (fx, fy) = (rng.gen_range(0.1..0.8), rng.gen_range(0.1..0.4));
            let groom = face_box(rng, fx, fy);
            s.face(GROOM_CLUSTER, conf, groom, &[]);
            guest_faces(rng, &mut s, 3, (0.05, 0.85));
        }
        WeddingKind::NoFlowers => {
            let c = couple(rng);
            s.face(BRIDE_CLUSTER, conf, c.bride, &["smiling"]).face(GROOM_CLUSTER, conf, c.groom, &[]);
        }
        WeddingKind::VaseAside => {
            let c = couple(rng);
            let x = c.groom.right_edge() + rng.gen_range(0.08..0.15);
            let vase = bbox(x, rng.gen_range(0.5..0.7), rng.gen_range(0.06..0.1), rng.gen_range(0.1..0.15));
            s.face(BRIDE_CLUSTER, conf, c.bride, &[])
                .face(GROOM_CLUSTER, conf, c.groom, &[])
                .thing("flower", conf, vase)
                .thing("vase", conf, vase);
        }
    }
    scenery(rng, &mut s);
    s.build()
}

/// A 352-image wedding album built from the composition mix above.
pub fn wedding_fixture() -> WeddingFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(WEDDING_SEED);
    let mut plan: Vec<WeddingKind> = WEDDING_MIX
        .iter()
        .flat_map(|(kind, n)| std::iter::repeat_n(*kind, *n))
        .collect();
    debug_assert_eq!(plan.len(), WEDDING_SIZE);
    plan.shuffle(&mut rng);
    let mut images = Vec::with_capacity(plan.len());
    let mut kinds = Vec::with_capacity(plan.len());
    for (k, kind) in plan.into_iter().enumerate() {
        let id = format!("wed_{:04}", k + 1);
        images.push(wedding_image(&mut rng, &id, kind));
        kinds.push((id, kind));
    }
    let first = |wanted: WeddingKind| {
        kinds
            .iter()
            .find(|(_, k)| *k == wanted)
            .map(|(id, _)| id.clone())
            .expect("every kind occurs")
    };
    let ground_truth: Vec<String> = kinds
        .iter()
        .filter(|(_, k)| *k == WeddingKind::Target)
        .map(|(id, _)| id.clone())
        .collect();
    WeddingFixture {
        album: Album::new("wedding", images).expect("fixture ids are unique"),
        positive: first(WeddingKind::Target),
        negative: first(WeddingKind::Boutonniere),
        ground_truth,
        kinds,
    }
}

const FESTIVAL_LABELS: [&str; 40] = [
    "guitar", "microphone", "drum", "keyboard", "speaker", "stage", "light", "person", "hat", "sunglasses_case",
    "bottle", "cup", "flag", "banner", "tent", "tree", "car", "bicycle", "dog", "balloon", "camera", "phone",
    "backpack", "chair", "table", "umbrella", "sign", "fence", "truck", "bench", "trash_can", "food", "pizza",
    "cake", "flower", "sky", "cloud", "screen", "cable", "amplifier",
];

#[derive(Debug, Clone)]
pub struct FestivalFixture {
    pub album: Album,
    /// The program examples are drawn from.
    pub target: String,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

/// A music-festival album of `n` images of 3 to 12 detections. About a
/// quarter show a guitar to the left of a microphone.
pub fn festival_fixture(n: usize) -> FestivalFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(FESTIVAL_SEED);
    let mut images = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = Scene::new(format!("fest_{:04}", k + 1));
        if rng.gen_bool(0.25) {
            let y = rng.gen_range(0.3..0.6);
            let guitar = bbox(rng.gen_range(0.05..0.4), y, 0.12, 0.2);
            let mic = bbox(guitar.right_edge() + rng.gen_range(0.05..0.3), y - 0.1, 0.05, 0.15);
            s.thing("guitar", 0.9, guitar).thing("microphone", 0.85, mic);
        }
        for _ in 0..rng.gen_range(3..11) {
            let b = bbox(rng.gen_range(0.0..0.9), rng.gen_range(0.0..0.9), rng.gen_range(0.03..0.3), rng.gen_range(0.03..0.3));
            if rng.gen_bool(0.3) {
                let cluster = format!("p{:03}", rng.gen_range(0..60));
                let props: Vec<&str> = ["smiling", "sunglasses", "eyesopen", "beard"]
                    .into_iter()
                    .filter(|_| rng.gen_bool(0.4))
                    .collect();
                s.face(&cluster, rng.gen_range(0.4..0.99), b, &props);
            } else {
                let label = FESTIVAL_LABELS[rng.gen_range(0..FESTIVAL_LABELS.len())];
                s.thing(label, rng.gen_range(0.3..0.99), b);
            }
        }
        images.push(s.build());
    }
    let album = Album::new("festival", images).expect("fixture ids are unique");
    let target = "exists x. exists y. HasType(x, Guitar) && HasType(y, Microphone) && HasRelation(x, y, Left)";
    let hits = search(&parse(target).expect("valid program"), &album).expect("known constants");
    let positive: Vec<String> = hits.iter().take(3).cloned().collect();
    let negative: Vec<String> = album
        .image_ids()
        .filter(|id| !hits.iter().any(|h| h == id))
        .take(3)
        .map(str::to_owned)
        .collect();
    FestivalFixture {
        album,
        target: target.to_owned(),
        positive,
        negative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::TagTarget;

    #[test]
    fn fig1_layout() {
        let album = fig1_album();
        assert_eq!(album.len(), 4);
        let mut a = album.clone();
        a.register_tag("alice", TagTarget::FaceCluster(BRIDE_CLUSTER.into())).unwrap();
        let above = parse("exists x. exists y. HasType(x, Alice) && HasType(y, Flower) && HasRelation(x, y, Above)").unwrap();
        let near = parse("exists x. exists y. HasType(x, Alice) && HasType(y, Flower) && HasRelation(x, y, NextTo)").unwrap();
        assert_eq!(search(&above, &a).unwrap(), ["fig1_1", "fig1_2", "fig1_3"]);
        assert_eq!(search(&near, &a).unwrap(), ["fig1_1", "fig1_2", "fig1_3", "fig1_4"]);
    }

    #[test]
    fn wedding_is_deterministic_and_sized() {
        let a = wedding_fixture();
        let b = wedding_fixture();
        assert_eq!(a.album.len(), WEDDING_SIZE);
        assert_eq!(a.ground_truth, b.ground_truth);
        assert_eq!(a.album.images().collect::<Vec<_>>(), b.album.images().collect::<Vec<_>>());
        assert_eq!(a.ground_truth.len(), 48);
        assert!(a.ground_truth.contains(&a.positive));
        assert!(!a.ground_truth.contains(&a.negative));
    }

    #[test]
    fn wedding_ground_truth_matches_the_intended_program() {
        let mut f = wedding_fixture();
        f.album.register_tag("alice", TagTarget::FaceCluster(BRIDE_CLUSTER.into())).unwrap();
        f.album.register_tag("bob", TagTarget::FaceCluster(GROOM_CLUSTER.into())).unwrap();
        let p = parse(
            "exists x. exists y. exists z. HasType(x, Alice) && HasType(y, Bob) && HasType(z, Flower) \
             && HasRelation(x, y, NextTo) && HasRelation(x, z, Above)",
        )
        .unwrap();
        assert_eq!(search(&p, &f.album).unwrap(), f.ground_truth);
    }

    #[test]
    fn festival_has_examples_of_both_polarities() {
        let f = festival_fixture(400);
        assert_eq!(f.album.len(), 400);
        assert_eq!((f.positive.len(), f.negative.len()), (3, 3));
        assert!(f.album.vocabulary().len() > 40);
    }

    #[test]
    fn replay_texts_leave_two_holes() {
        use crate::synthesis::{complete_sketches, prepare_sketches, ExampleSet};
        let lines = |t: &str| t.lines().map(str::to_owned).collect::<Vec<_>>();
        let (fig1, _) = prepare_sketches(&lines(FIG1_REPLAY), &fig1_album());
        assert_eq!(fig1.len(), 1);
        assert_eq!(fig1[0].holes().len(), 2);

        let f = festival_fixture(FESTIVAL_SIZE);
        let (sketches, _) = prepare_sketches(&lines(FESTIVAL_REPLAY), &f.album);
        assert_eq!(sketches.len(), 2);
        assert!(sketches.iter().all(|s| s.holes().len() == 2));
        let examples = ExampleSet::new(f.positive.clone(), f.negative.clone()).unwrap();
        let outcome = complete_sketches(&sketches, &examples, &f.album);
        assert!(outcome.program().is_some());
    }
}
