//! Box geometry and the evidence records shared by every stage.
//!
//! Boxes use continuous coordinates: area is `(x_max - x_min) * (y_max - y_min)`
//! with no "+1" pixel convention. VOC integer boxes that assume inclusive
//! pixel ranges should be widened by one before ingestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box with strictly positive area and finite coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("invalid box {coords:?}: non-finite coordinate")));
        }
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::invalid(format!("invalid box {coords:?}: empty extent")));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Total order over coordinates, used only for deterministic output sorting.
    pub(crate) fn cmp_coords(&self, other: &BoundingBox) -> std::cmp::Ordering {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BoundingBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// Intersection over union. Symmetric, in `[0, 1]`, and 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// One scored box from one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class_id: String,
    pub bbox: BoundingBox,
    pub score: f64,
    pub source_id: String,
}

impl Detection {
    pub fn new(
        image_id: impl Into<String>,
        class_id: impl Into<String>,
        bbox: BoundingBox,
        score: f64,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let det = Self {
            image_id: image_id.into(),
            class_id: class_id.into(),
            bbox,
            score,
            source_id: source_id.into(),
        };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.score.is_finite() {
            return Err(Error::invalid(format!("non-finite score {}", self.score)));
        }
        check_ids(&self.image_id, &self.class_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub image_id: String,
    pub class_id: String,
    pub bbox: BoundingBox,
    pub difficult: bool,
}

impl GroundTruthObject {
    pub fn new(
        image_id: impl Into<String>,
        class_id: impl Into<String>,
        bbox: BoundingBox,
        difficult: bool,
    ) -> Result<Self> {
        let gt = Self {
            image_id: image_id.into(),
            class_id: class_id.into(),
            bbox,
            difficult,
        };
        check_ids(&gt.image_id, &gt.class_id)?;
        Ok(gt)
    }
}

/// Image-level confidence that `class_id` is present in `image_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationScore {
    pub image_id: String,
    pub class_id: String,
    pub score: f64,
    pub source_id: String,
}

impl ClassificationScore {
    pub fn new(
        image_id: impl Into<String>,
        class_id: impl Into<String>,
        score: f64,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let cls = Self {
            image_id: image_id.into(),
            class_id: class_id.into(),
            score,
            source_id: source_id.into(),
        };
        if !cls.score.is_finite() {
            return Err(Error::invalid(format!("non-finite score {}", cls.score)));
        }
        check_ids(&cls.image_id, &cls.class_id)?;
        Ok(cls)
    }
}

fn check_ids(image_id: &str, class_id: &str) -> Result<()> {
    if image_id.is_empty() {
        return Err(Error::invalid("empty image_id"));
    }
    if class_id.is_empty() {
        return Err(Error::invalid("empty class_id"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20.0, 20.0, 30.0, 30.0)), 0.0);
        // inter 50, union 150
        assert!((iou(&a, &bb(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn touching_boxes_do_not_overlap() {
        assert_eq!(iou(&bb(0.0, 0.0, 1.0, 1.0), &bb(1.0, 0.0, 2.0, 1.0)), 0.0);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(BoundingBox::new(10.0, 10.0, 5.0, 20.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn records_validate_ids_and_scores() {
        let b = bb(0.0, 0.0, 1.0, 1.0);
        assert!(Detection::new("", "dog", b, 0.5, "d").is_err());
        assert!(Detection::new("img", "", b, 0.5, "d").is_err());
        assert!(Detection::new("img", "dog", b, f64::NAN, "d").is_err());
        assert!(ClassificationScore::new("img", "dog", f64::INFINITY, "c").is_err());
        assert!(GroundTruthObject::new("img", "dog", b, false).is_ok());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.01..80.0f64, 0.01..80.0f64)
            .prop_map(|(x, y, w, h)| bb(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assert_eq!(iou(&a, &a), 1.0);
        }
    }
}
