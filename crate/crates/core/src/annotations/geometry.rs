//! Spatial relations between bounding boxes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Axis-aligned box in normalized image coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

const EPS: f64 = 1e-9;

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, String> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), String> {
        let Self { x, y, w, h } = *self;
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err("bbox coordinates must be finite".into());
        }
        if x < 0.0 || y < 0.0 {
            return Err(format!("bbox origin ({x}, {y}) is negative"));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(format!("bbox size {w}x{h} must be positive"));
        }
        if x + w > 1.0 + EPS {
            return Err(format!("bbox x+w = {} exceeds 1", x + w));
        }
        if y + h > 1.0 + EPS {
            return Err(format!("bbox y+h = {} exceeds 1", y + h));
        }
        Ok(())
    }

    pub fn cx(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn cy(&self) -> f64 {
        self.y + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right_edge(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom_edge(&self) -> f64 {
        self.y + self.h
    }

    /// Length of the overlap of the two horizontal extents (0 if disjoint).
    pub fn horizontal_overlap(&self, other: &BBox) -> f64 {
        (self.right_edge().min(other.right_edge()) - self.x.max(other.x)).max(0.0)
    }

    pub fn vertical_overlap(&self, other: &BBox) -> f64 {
        (self.bottom_edge().min(other.bottom_edge()) - self.y.max(other.y)).max(0.0)
    }

    /// Distance between the horizontal extents (0 if they overlap).
    pub fn horizontal_gap(&self, other: &BBox) -> f64 {
        (self.x.max(other.x) - self.right_edge().min(other.right_edge())).max(0.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        self.horizontal_overlap(other) * self.vertical_overlap(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpatialRelation {
    Above,
    Below,
    Left,
    Right,
    NextTo,
    Inside,
    Contains,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown spatial relation `{0}`")]
pub struct UnknownRelation(pub String);

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 7] = [
        SpatialRelation::Above,
        SpatialRelation::Below,
        SpatialRelation::Left,
        SpatialRelation::Right,
        SpatialRelation::NextTo,
        SpatialRelation::Inside,
        SpatialRelation::Contains,
    ];

    /// Canonical constant token.
    pub fn token(self) -> &'static str {
        match self {
            SpatialRelation::Above => "above",
            SpatialRelation::Below => "below",
            SpatialRelation::Left => "left",
            SpatialRelation::Right => "right",
            SpatialRelation::NextTo => "nextto",
            SpatialRelation::Inside => "inside",
            SpatialRelation::Contains => "contains",
        }
    }
}

impl FromStr for SpatialRelation {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = crate::dsl::canonicalize(s);
        Self::ALL
            .into_iter()
            .find(|r| r.token() == key)
            .ok_or(UnknownRelation(s.to_owned()))
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Thresholds of the spatial relation definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialConfig {
    /// `above`/`below` need horizontal overlap of at least this fraction of
    /// the narrower box.
    pub above_overlap_fraction: f64,
    /// `nextto` holds for boxes at most this far apart horizontally that
    /// overlap vertically.
    pub nextto_max_gap: f64,
    /// `inside(a, b)` holds when this fraction of `a`'s area lies in `b`.
    pub inside_fraction: f64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            above_overlap_fraction: 0.25,
            nextto_max_gap: 0.10,
            inside_fraction: 0.9,
        }
    }
}

impl SpatialConfig {
    /// Real-arithmetic definitions read with tolerance `EPS`: strict
    /// comparisons need a margin of `EPS`, inclusive ones allow `EPS` slack.
    pub fn holds(&self, rel: SpatialRelation, a: &BBox, b: &BBox) -> bool {
        match rel {
            SpatialRelation::Left => a.cx() < b.cx() - EPS,
            SpatialRelation::Right => a.cx() > b.cx() + EPS,
            SpatialRelation::Above => a.cy() < b.cy() - EPS && self.stacked(a, b),
            SpatialRelation::Below => a.cy() > b.cy() + EPS && self.stacked(a, b),
            SpatialRelation::NextTo => {
                let v = a.vertical_overlap(b) > EPS;
                let intersect = a.horizontal_overlap(b) > EPS && v;
                intersect || (a.horizontal_gap(b) <= self.nextto_max_gap + EPS && v)
            }
            SpatialRelation::Inside => a.intersection_area(b) >= self.inside_fraction * a.area() - EPS,
            SpatialRelation::Contains => self.holds(SpatialRelation::Inside, b, a),
        }
    }

    fn stacked(&self, a: &BBox, b: &BBox) -> bool {
        a.horizontal_overlap(b) >= self.above_overlap_fraction * a.w.min(b.w) - EPS
    }
}

/// Evaluates a relation given by its constant token.
pub fn spatial_relation(
    a: &BBox,
    b: &BBox,
    rel: &str,
    config: &SpatialConfig,
) -> Result<bool, UnknownRelation> {
    let rel: SpatialRelation = rel.parse()?;
    Ok(config.holds(rel, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn rel(a: &BBox, b: &BBox, r: &str) -> bool {
        spatial_relation(a, b, r, &SpatialConfig::default()).unwrap()
    }

    #[test]
    fn left_right_by_centers() {
        let a = bb(0.1, 0.1, 0.2, 0.2);
        let b = bb(0.5, 0.1, 0.2, 0.2);
        assert!(rel(&a, &b, "left"));
        assert!(!rel(&a, &b, "right"));
        assert!(rel(&b, &a, "right"));
    }

    #[test]
    fn above_needs_center_order_and_overlap() {
        let a = bb(0.4, 0.2, 0.1, 0.1);
        let b = bb(0.4, 0.5, 0.1, 0.2);
        // overlap 0.1 >= 0.25 * 0.1
        assert!(rel(&a, &b, "above"));
        assert!(!rel(&a, &b, "below"));
        assert!(rel(&b, &a, "below"));
        // same heights but no horizontal overlap
        let c = bb(0.8, 0.5, 0.1, 0.2);
        assert!(!rel(&a, &c, "above"));
        // overlap just under a quarter of the narrower width
        let d = bb(0.4 + 0.1 - 0.024, 0.5, 0.1, 0.2);
        assert!(!rel(&a, &d, "above"));
        let e = bb(0.4 + 0.1 - 0.026, 0.5, 0.1, 0.2);
        assert!(rel(&a, &e, "above"));
    }

    #[test]
    fn inside_by_area_fraction() {
        // a is 0.2x0.2; shifting it so 0.19 of its width lies in b keeps 95% of its area inside
        let b = bb(0.3, 0.3, 0.4, 0.4);
        let a = bb(0.3 - 0.01, 0.4, 0.2, 0.2);
        assert!((a.intersection_area(&b) / a.area() - 0.95).abs() < 1e-9);
        assert!(rel(&a, &b, "inside"));
        assert!(rel(&b, &a, "contains"));
        assert!(!rel(&b, &a, "inside"));
        let out = bb(0.3 - 0.05, 0.4, 0.2, 0.2); // 75% inside
        assert!(!rel(&out, &b, "inside"));
    }

    #[test]
    fn nextto_by_gap_or_intersection() {
        let a = bb(0.1, 0.1, 0.2, 0.2);
        let near = bb(0.38, 0.15, 0.1, 0.1); // gap 0.08
        let far = bb(0.45, 0.15, 0.1, 0.1); // gap 0.15
        let below = bb(0.35, 0.5, 0.1, 0.1); // no vertical overlap
        let overlapping = bb(0.25, 0.25, 0.2, 0.2);
        assert!(rel(&a, &near, "nextto"));
        assert!(!rel(&a, &far, "nextto"));
        assert!(!rel(&a, &below, "nextto"));
        assert!(rel(&a, &overlapping, "nextto"));
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let a = bb(0.1, 0.1, 0.2, 0.2);
        assert_eq!(
            spatial_relation(&a, &a, "holding", &SpatialConfig::default()),
            Err(UnknownRelation("holding".into()))
        );
        assert!(spatial_relation(&a, &a, "NextTo", &SpatialConfig::default()).is_ok());
    }

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(0.9, 0.1, 0.2, 0.1).is_err());
        assert!(BBox::new(0.1, 0.95, 0.2, 0.1).is_err());
        assert!(BBox::new(-0.1, 0.1, 0.2, 0.1).is_err());
        assert!(BBox::new(0.1, 0.1, 0.0, 0.1).is_err());
        assert!(BBox::new(0.8, 0.1, 0.2, 0.1).is_ok());
    }

    #[test]
    fn mutual_containment_bound_is_tight_at_twice_the_threshold_gap() {
        // Two unit-area boxes offset by 10% contain each other at the 0.9
        // threshold; their symmetric difference is 0.2 of either area.
        let a = bb(0.0, 0.0, 0.5, 0.5);
        let b = bb(0.05, 0.0, 0.5, 0.5);
        assert!(rel(&a, &b, "inside") && rel(&b, &a, "inside"));
        let sym = a.area() + b.area() - 2.0 * a.intersection_area(&b);
        assert!((sym - 0.2 * a.area()).abs() < 1e-9);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..0.9f64, 0.0..0.9f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(x, y, fw, fh)| {
            let w = (fw * (1.0 - x)).max(0.005);
            let h = (fh * (1.0 - y)).max(0.005);
            BBox { x, y, w, h }
        })
    }

    proptest! {
        #[test]
        fn nextto_is_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(rel(&a, &b, "nextto"), rel(&b, &a, "nextto"));
        }

        #[test]
        fn opposite_directions_exclude_each_other(a in arb_box(), b in arb_box()) {
            prop_assert!(!(rel(&a, &b, "left") && rel(&a, &b, "right")));
            prop_assert!(!(rel(&a, &b, "above") && rel(&a, &b, "below")));
            if a.cx() != b.cx() {
                prop_assert_eq!(rel(&a, &b, "left"), rel(&b, &a, "right"));
                prop_assert_ne!(rel(&a, &b, "left"), rel(&b, &a, "left"));
            }
            if a.cy() != b.cy() {
                prop_assert_eq!(rel(&a, &b, "above"), rel(&b, &a, "below"));
                prop_assert!(!(rel(&a, &b, "above") && rel(&b, &a, "above")));
            }
        }

        #[test]
        fn mutual_inside_means_near_identical(a in arb_box(), b in arb_box()) {
            if rel(&a, &b, "inside") && rel(&b, &a, "inside") {
                let sym = a.area() + b.area() - 2.0 * a.intersection_area(&b);
                // each box loses at most 10% of its own area, so the
                // difference is bounded by 0.1 * (area(a) + area(b))
                prop_assert!(sym <= 0.1 * (a.area() + b.area()) + 1e-9);
                prop_assert!(sym <= 0.2 * a.area().max(b.area()) + 1e-9);
            }
        }

        #[test]
        fn contains_is_converse_of_inside(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(rel(&a, &b, "contains"), rel(&b, &a, "inside"));
        }
    }
}
