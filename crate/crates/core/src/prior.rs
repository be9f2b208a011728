//! Prior performance models: precision-recall curves estimated on a
//! validation split, one per (class, source).
//!
//! Detectors are modeled directly from their labeled detections. A
//! classifier has no boxes, so its image score is broadcast onto the
//! detector boxes of the same image and the result is labeled like any
//! other detection set.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::cluster_detections;
use crate::geometry::{iou, BoundingBox, ClassificationScore, Detection, GroundTruthObject};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_N_MAX: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDetection {
    pub detection: Detection,
    pub is_true_positive: bool,
}

/// Matches detections of a single class to ground truth.
///
/// Detections are visited by score descending (input order breaks ties).
/// Each one takes the unmatched non-difficult box of highest IoU; it is a
/// true positive when that IoU reaches `iou_threshold`. A detection that
/// only overlaps difficult boxes at the threshold is dropped. The result is
/// in visiting order.
pub fn label_detections(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    iou_threshold: f64,
) -> Result<Vec<LabeledDetection>> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::invalid(format!(
            "iou threshold {iou_threshold} outside (0, 1)"
        )));
    }
    single_class(dets.iter().map(|d| d.class_id.as_str()).chain(gts.iter().map(|g| g.class_id.as_str())))?;

    let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, gt) in gts.iter().enumerate() {
        by_image.entry(gt.image_id.as_str()).or_default().push(i);
    }
    let mut consumed = vec![false; gts.len()];
    let mut labeled = Vec::with_capacity(dets.len());

    for det in rank_by_score(dets, |d| d.score) {
        let candidates = by_image.get(det.image_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let mut best: Option<(usize, f64)> = None;
        let mut touches_difficult = false;
        for &gi in candidates {
            let gt = &gts[gi];
            let overlap = iou(&det.bbox, &gt.bbox);
            if gt.difficult {
                touches_difficult |= overlap >= iou_threshold;
                continue;
            }
            if consumed[gi] {
                continue;
            }
            if best.is_none_or(|(_, o)| overlap > o) {
                best = Some((gi, overlap));
            }
        }
        match best {
            Some((gi, overlap)) if overlap >= iou_threshold => {
                consumed[gi] = true;
                labeled.push(LabeledDetection {
                    detection: det.clone(),
                    is_true_positive: true,
                });
            }
            _ if touches_difficult => {}
            _ => labeled.push(LabeledDetection {
                detection: det.clone(),
                is_true_positive: false,
            }),
        }
    }
    Ok(labeled)
}

/// Stable score-descending order.
pub(crate) fn rank_by_score<T>(items: &[T], score: impl Fn(&T) -> f64) -> Vec<&T> {
    let mut ranked: Vec<&T> = items.iter().collect();
    ranked.sort_by(|a, b| score(b).total_cmp(&score(a)));
    ranked
}

fn single_class<'a>(mut ids: impl Iterator<Item = &'a str>) -> Result<()> {
    if let Some(first) = ids.next() {
        if let Some(other) = ids.find(|c| *c != first) {
            return Err(Error::invalid(format!(
                "expected a single class, found `{first}` and `{other}`"
            )));
        }
    }
    Ok(())
}

/// A detector box carrying its image's classifier score, or no evidence
/// when the image has no classification record.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastDetection {
    pub image_id: String,
    pub class_id: String,
    pub bbox: BoundingBox,
    pub source_id: String,
    pub score: Option<f64>,
}

impl BroadcastDetection {
    pub fn to_detection(&self) -> Option<Detection> {
        self.score.map(|score| Detection {
            image_id: self.image_id.clone(),
            class_id: self.class_id.clone(),
            bbox: self.bbox,
            score,
            source_id: self.source_id.clone(),
        })
    }
}

/// Assigns each image's classification score to every detection in that
/// image. Images without detections produce nothing.
pub fn broadcast_classification(
    cls: &[ClassificationScore],
    dets: &[Detection],
    classifier_id: &str,
) -> Result<Vec<BroadcastDetection>> {
    single_class(cls.iter().map(|c| c.class_id.as_str()).chain(dets.iter().map(|d| d.class_id.as_str())))?;
    let mut by_image = BTreeMap::new();
    for c in cls {
        if c.source_id != classifier_id {
            return Err(Error::invalid(format!(
                "classification record from `{}` while broadcasting `{classifier_id}`",
                c.source_id
            )));
        }
        by_image.insert(c.image_id.as_str(), c.score);
    }
    Ok(dets
        .iter()
        .map(|d| BroadcastDetection {
            image_id: d.image_id.clone(),
            class_id: d.class_id.clone(),
            bbox: d.bbox,
            source_id: classifier_id.to_string(),
            score: by_image.get(d.image_id.as_str()).copied(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrSample {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Raw precision-recall samples, one per distinct score, before the
/// monotone envelope is applied.
pub fn raw_pr_samples(labeled: &[LabeledDetection], n_pos: usize) -> Result<Vec<PrSample>> {
    if n_pos == 0 {
        return Err(Error::invalid("precision-recall curve needs at least one positive"));
    }
    if labeled.is_empty() {
        return Err(Error::invalid("precision-recall curve needs at least one detection"));
    }
    let ranked = rank_by_score(labeled, |l| l.detection.score);
    let mut samples: Vec<PrSample> = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].detection.score;
        while i < ranked.len() && ranked[i].detection.score == threshold {
            tp += ranked[i].is_true_positive as usize;
            seen += 1;
            i += 1;
        }
        samples.push(PrSample {
            threshold,
            precision: tp as f64 / seen as f64,
            recall: tp as f64 / n_pos as f64,
        });
    }
    Ok(samples)
}

/// Precision-recall curve with the interpolated (max over lower thresholds)
/// precision envelope. Thresholds are strictly decreasing.
pub fn build_pr_curve(labeled: &[LabeledDetection], n_pos: usize) -> Result<Vec<PrSample>> {
    let mut samples = raw_pr_samples(labeled, n_pos)?;
    let mut running = 0.0f64;
    for s in samples.iter_mut().rev() {
        running = running.max(s.precision);
        s.precision = running;
    }
    Ok(samples)
}

/// Smallest `n` in `1..=n_max` with `precision + recall^n <= 1` at every
/// sample, or `n_max` when none qualifies.
pub fn fit_ambiguity_exponent(samples: &[PrSample], n_max: u32) -> u32 {
    let n_max = n_max.max(1);
    (1..=n_max)
        .find(|&n| {
            samples
                .iter()
                .all(|s| s.precision + s.recall.powi(n as i32) <= 1.0)
        })
        .unwrap_or(n_max)
}

/// How the ambiguity exponent of a model is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    Auto { n_max: u32 },
    Fixed(u32),
}

impl Default for Exponent {
    fn default() -> Self {
        Exponent::Auto { n_max: DEFAULT_N_MAX }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Exponent::default());
        }
        match s.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(Exponent::Fixed(n)),
            _ => Err(Error::invalid(format!("exponent must be `auto` or an integer >= 1, got `{s}`"))),
        }
    }
}

/// A source's precision-recall behavior for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    class_id: String,
    source_id: String,
    samples: Vec<PrSample>,
    n: u32,
    n_pos: usize,
    n_det: usize,
    iou_threshold: f64,
}

impl PriorModel {
    pub fn new(
        class_id: impl Into<String>,
        source_id: impl Into<String>,
        samples: Vec<PrSample>,
        n: u32,
        n_pos: usize,
        n_det: usize,
        iou_threshold: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("prior model has no samples"));
        }
        if n < 1 {
            return Err(Error::invalid("ambiguity exponent must be >= 1"));
        }
        for s in &samples {
            if !s.threshold.is_finite() {
                return Err(Error::invalid(format!("non-finite threshold {}", s.threshold)));
            }
            if !(0.0..=1.0).contains(&s.precision) || !(0.0..=1.0).contains(&s.recall) {
                return Err(Error::invalid(format!(
                    "precision/recall outside [0, 1] at threshold {}",
                    s.threshold
                )));
            }
        }
        for w in samples.windows(2) {
            if !(w[1].threshold < w[0].threshold) {
                return Err(Error::invalid("thresholds must be strictly decreasing"));
            }
            if w[1].recall < w[0].recall {
                return Err(Error::invalid("recall must not decrease as the threshold decreases"));
            }
            if w[1].precision > w[0].precision {
                return Err(Error::invalid("precision must not increase as the threshold decreases"));
            }
        }
        Ok(Self {
            class_id: class_id.into(),
            source_id: source_id.into(),
            samples,
            n,
            n_pos,
            n_det,
            iou_threshold,
        })
    }

    /// Builds a model from labeled validation detections.
    pub fn fit(
        class_id: impl Into<String>,
        source_id: impl Into<String>,
        labeled: &[LabeledDetection],
        n_pos: usize,
        exponent: Exponent,
        iou_threshold: f64,
    ) -> Result<Self> {
        let samples = build_pr_curve(labeled, n_pos)?;
        let n = match exponent {
            Exponent::Auto { n_max } => fit_ambiguity_exponent(&samples, n_max),
            Exponent::Fixed(n) => n,
        };
        Self::new(class_id, source_id, samples, n, n_pos, labeled.len(), iou_threshold)
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn samples(&self) -> &[PrSample] {
        &self.samples
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    /// `(precision, recall)` at score `s`: clamped to the end samples outside
    /// the threshold range, linear between bracketing samples inside it.
    pub fn lookup(&self, s: f64) -> (f64, f64) {
        let samples = &self.samples;
        let first = samples[0];
        let last = samples[samples.len() - 1];
        if s >= first.threshold {
            return (first.precision, first.recall);
        }
        if s <= last.threshold {
            return (last.precision, last.recall);
        }
        // first index whose threshold is <= s; always in 1..len
        let lo = samples.partition_point(|p| p.threshold > s);
        let (above, below) = (samples[lo - 1], samples[lo]);
        if below.threshold == s {
            return (below.precision, below.recall);
        }
        let w = (s - below.threshold) / (above.threshold - below.threshold);
        (
            lerp(below.precision, above.precision, w),
            lerp(below.recall, above.recall, w),
        )
    }
}

fn lerp(from: f64, to: f64, w: f64) -> f64 {
    let v = from + w * (to - from);
    v.clamp(from.min(to), from.max(to))
}

#[derive(Debug, Clone, Copy)]
pub struct PriorOptions {
    pub iou_threshold: f64,
    pub exponent: Exponent,
    /// Clustering IoU for the detector boxes a classifier score is
    /// broadcast onto.
    pub cluster_iou: f64,
}

impl Default for PriorOptions {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            exponent: Exponent::default(),
            cluster_iou: crate::fusion::DEFAULT_CLUSTER_IOU,
        }
    }
}

/// Builds every prior needed to fuse this validation split: one per
/// (class, detector source) and one per (class, classifier source) for each
/// class that has detections.
///
/// Classifier scores are broadcast onto the cross-detector clusters, which
/// for a single detector are its detections.
pub fn build_priors(
    gts: &[GroundTruthObject],
    dets: &[Detection],
    cls: &[ClassificationScore],
    options: &PriorOptions,
) -> Result<Vec<PriorModel>> {
    let mut gt_by_class: BTreeMap<&str, Vec<GroundTruthObject>> = BTreeMap::new();
    for g in gts {
        gt_by_class.entry(g.class_id.as_str()).or_default().push(g.clone());
    }
    let mut det_by_class: BTreeMap<&str, BTreeMap<&str, Vec<Detection>>> = BTreeMap::new();
    for d in dets {
        det_by_class
            .entry(d.class_id.as_str())
            .or_default()
            .entry(d.source_id.as_str())
            .or_default()
            .push(d.clone());
    }
    let mut cls_by_class: BTreeMap<&str, BTreeMap<&str, Vec<ClassificationScore>>> = BTreeMap::new();
    for c in cls {
        cls_by_class
            .entry(c.class_id.as_str())
            .or_default()
            .entry(c.source_id.as_str())
            .or_default()
            .push(c.clone());
    }

    enum Job<'a> {
        Detector(&'a [Detection]),
        Classifier(&'a [ClassificationScore]),
    }
    let empty_gt = Vec::new();
    let mut jobs = Vec::new();
    for (&class_id, sources) in &det_by_class {
        let class_gts = gt_by_class.get(class_id).unwrap_or(&empty_gt);
        for (&source_id, d) in sources {
            jobs.push((class_id, source_id, class_gts, Job::Detector(d)));
        }
        if let Some(classifiers) = cls_by_class.get(class_id) {
            for (&source_id, c) in classifiers {
                jobs.push((class_id, source_id, class_gts, Job::Classifier(c)));
            }
        }
    }

    jobs.par_iter()
        .map(|(class_id, source_id, class_gts, job)| {
            let n_pos = class_gts.iter().filter(|g| !g.difficult).count();
            if n_pos == 0 {
                return Err(Error::Config(format!(
                    "class `{class_id}` has no non-difficult ground truth; cannot build prior for `{source_id}`"
                )));
            }
            let labeled = match job {
                Job::Detector(d) => label_detections(d, class_gts, options.iou_threshold)?,
                Job::Classifier(c) => {
                    let class_dets: Vec<Detection> = det_by_class[class_id].values().flatten().cloned().collect();
                    let base: Vec<Detection> = cluster_detections(&class_dets, options.cluster_iou)?
                        .into_iter()
                        .map(|cluster| cluster.representative().clone())
                        .collect();
                    let scored: Vec<Detection> = broadcast_classification(c, &base, source_id)?
                        .iter()
                        .filter_map(BroadcastDetection::to_detection)
                        .collect();
                    label_detections(&scored, class_gts, options.iou_threshold)?
                }
            };
            if labeled.is_empty() {
                return Err(Error::Config(format!(
                    "no usable validation detections for class `{class_id}`, source `{source_id}`"
                )));
            }
            PriorModel::fit(*class_id, *source_id, &labeled, n_pos, options.exponent, options.iou_threshold)
        })
        .collect()
}

/// Distinct (class, source) keys of a model set, used for coverage checks.
pub fn prior_keys(models: &[PriorModel]) -> BTreeSet<(String, String)> {
    models
        .iter()
        .map(|m| (m.class_id.clone(), m.source_id.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(image: &str, b: BoundingBox, score: f64) -> Detection {
        Detection::new(image, "dog", b, score, "det").unwrap()
    }

    fn gt(image: &str, b: BoundingBox, difficult: bool) -> GroundTruthObject {
        GroundTruthObject::new(image, "dog", b, difficult).unwrap()
    }

    fn labels(seq: &[(f64, bool)]) -> Vec<LabeledDetection> {
        seq.iter()
            .map(|&(s, tp)| LabeledDetection {
                detection: det("a", bb(0.0, 0.0, 1.0, 1.0), s),
                is_true_positive: tp,
            })
            .collect()
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        // 10x10 truth; both detections are shifted 1px -> IoU 90/110 ~ 0.82
        let truth = [gt("a", bb(0.0, 0.0, 10.0, 10.0), false)];
        let dets = [
            det("a", bb(1.0, 0.0, 11.0, 10.0), 0.7),
            det("a", bb(0.0, 1.0, 10.0, 11.0), 0.9),
        ];
        let out = label_detections(&dets, &truth, 0.5).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].detection.score, 0.9);
        assert!(out[0].is_true_positive);
        assert!(!out[1].is_true_positive);
    }

    #[test]
    fn below_threshold_is_false_positive() {
        let truth = [gt("a", bb(0.0, 0.0, 10.0, 10.0), false)];
        // IoU = 40 / 100 after the box shrinks to 4 columns
        let dets = [det("a", bb(0.0, 0.0, 4.0, 10.0), 0.9)];
        let out = label_detections(&dets, &truth, 0.5).unwrap();
        assert!(!out[0].is_true_positive);
    }

    #[test]
    fn empty_ground_truth_gives_false_positive() {
        let out = label_detections(&[det("a", bb(0.0, 0.0, 1.0, 1.0), 0.3)], &[], 0.5).unwrap();
        assert_eq!(out.len(), 1);
        assert!(!out[0].is_true_positive);
    }

    #[test]
    fn difficult_matches_are_dropped() {
        let truth = [gt("a", bb(0.0, 0.0, 10.0, 10.0), true)];
        let out = label_detections(&[det("a", bb(0.0, 0.0, 10.0, 10.0), 0.3)], &truth, 0.5).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn matching_is_per_image() {
        let truth = [gt("b", bb(0.0, 0.0, 10.0, 10.0), false)];
        let out = label_detections(&[det("a", bb(0.0, 0.0, 10.0, 10.0), 0.3)], &truth, 0.5).unwrap();
        assert!(!out[0].is_true_positive);
    }

    #[test]
    fn label_rejects_bad_threshold_and_mixed_classes() {
        assert!(label_detections(&[], &[], 0.0).is_err());
        assert!(label_detections(&[], &[], 1.0).is_err());
        let cat = Detection::new("a", "cat", bb(0.0, 0.0, 1.0, 1.0), 0.1, "det").unwrap();
        assert!(label_detections(&[cat, det("a", bb(0.0, 0.0, 1.0, 1.0), 0.2)], &[], 0.5).is_err());
    }

    #[test]
    fn broadcast_assigns_image_score() {
        let cls = [
            ClassificationScore::new("A", "dog", 0.9, "cls").unwrap(),
            ClassificationScore::new("B", "dog", 0.4, "cls").unwrap(),
        ];
        let dets = [
            det("A", bb(0.0, 0.0, 1.0, 1.0), 0.2),
            det("A", bb(5.0, 5.0, 6.0, 6.0), 0.8),
            det("C", bb(0.0, 0.0, 1.0, 1.0), 0.5),
        ];
        let out = broadcast_classification(&cls, &dets, "cls").unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].score, Some(0.9));
        assert_eq!(out[1].score, Some(0.9));
        assert_eq!(out[1].bbox, dets[1].bbox);
        assert!(out.iter().all(|b| b.source_id == "cls"));
        // B has no detections, so nothing is produced for it
        assert!(out.iter().all(|b| b.image_id != "B"));
        assert_eq!(out[2].score, None);
        assert!(out[2].to_detection().is_none());
    }

    #[test]
    fn pr_curve_worked_example() {
        let l = labels(&[(0.9, true), (0.8, false), (0.7, true)]);
        let raw = raw_pr_samples(&l, 2).unwrap();
        let expect_raw = [(0.9, 1.0, 0.5), (0.8, 0.5, 0.5), (0.7, 2.0 / 3.0, 1.0)];
        for (s, e) in raw.iter().zip(expect_raw) {
            assert_eq!((s.threshold, s.precision, s.recall), e);
        }
        let env = build_pr_curve(&l, 2).unwrap();
        let expect_env = [(0.9, 1.0, 0.5), (0.8, 2.0 / 3.0, 0.5), (0.7, 2.0 / 3.0, 1.0)];
        for (s, e) in env.iter().zip(expect_env) {
            assert_eq!((s.threshold, s.precision, s.recall), e);
        }
    }

    #[test]
    fn pr_curve_groups_ties() {
        let l = labels(&[(0.5, true), (0.5, false), (0.2, true)]);
        let c = build_pr_curve(&l, 2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].precision, c[0].recall), (2.0 / 3.0, 0.5));
    }

    #[test]
    fn pr_curve_extremes() {
        let c = build_pr_curve(&labels(&[(0.9, true), (0.4, true)]), 2).unwrap();
        assert_eq!((c[1].precision, c[1].recall), (1.0, 1.0));
        let c = build_pr_curve(&labels(&[(0.9, false), (0.4, false)]), 3).unwrap();
        assert!(c.iter().all(|s| s.precision == 0.0 && s.recall == 0.0));
        assert!(build_pr_curve(&labels(&[(0.9, true)]), 0).is_err());
        assert!(build_pr_curve(&[], 1).is_err());
    }

    fn sample(precision: f64, recall: f64) -> PrSample {
        PrSample {
            threshold: 0.0,
            precision,
            recall,
        }
    }

    #[test]
    fn exponent_fit_examples() {
        assert_eq!(fit_ambiguity_exponent(&[sample(0.9, 0.2), sample(0.6, 0.5)], 16), 2);
        assert_eq!(fit_ambiguity_exponent(&[sample(0.0, 1.0)], 16), 1);
        assert_eq!(fit_ambiguity_exponent(&[sample(0.5, 1.0)], 8), 8);
    }

    fn two_point_model() -> PriorModel {
        let samples = vec![
            PrSample { threshold: 0.9, precision: 1.0, recall: 0.5 },
            PrSample { threshold: 0.7, precision: 2.0 / 3.0, recall: 1.0 },
        ];
        PriorModel::new("dog", "det", samples, 1, 2, 3, 0.5).unwrap()
    }

    #[test]
    fn lookup_interpolates_and_clamps() {
        let m = two_point_model();
        let (p, r) = m.lookup(0.8);
        assert!((p - 5.0 / 6.0).abs() < 1e-12);
        assert!((r - 0.75).abs() < 1e-12);
        assert_eq!(m.lookup(0.95), (1.0, 0.5));
        assert_eq!(m.lookup(0.1), (2.0 / 3.0, 1.0));
        assert_eq!(m.lookup(0.7), (2.0 / 3.0, 1.0));
    }

    #[test]
    fn model_construction_checks_invariants() {
        assert!(PriorModel::new("c", "s", vec![], 1, 1, 0, 0.5).is_err());
        let bad_order = vec![
            PrSample { threshold: 0.5, precision: 1.0, recall: 0.5 },
            PrSample { threshold: 0.7, precision: 0.5, recall: 1.0 },
        ];
        assert!(PriorModel::new("c", "s", bad_order, 1, 1, 2, 0.5).is_err());
        let not_envelope = vec![
            PrSample { threshold: 0.9, precision: 0.5, recall: 0.5 },
            PrSample { threshold: 0.7, precision: 0.6, recall: 1.0 },
        ];
        assert!(PriorModel::new("c", "s", not_envelope, 1, 1, 2, 0.5).is_err());
        assert!(PriorModel::new("c", "s", vec![sample(0.5, 0.5)], 0, 1, 1, 0.5).is_err());
    }

    #[test]
    fn exponent_parses() {
        assert_eq!("auto".parse::<Exponent>().unwrap(), Exponent::Auto { n_max: 16 });
        assert_eq!("4".parse::<Exponent>().unwrap(), Exponent::Fixed(4));
        assert!("0".parse::<Exponent>().is_err());
        assert!("x".parse::<Exponent>().is_err());
    }

    #[test]
    fn build_priors_covers_classes_and_sources() {
        let truth = vec![
            GroundTruthObject::new("a", "dog", bb(0.0, 0.0, 10.0, 10.0), false).unwrap(),
            GroundTruthObject::new("a", "cat", bb(20.0, 20.0, 30.0, 30.0), false).unwrap(),
        ];
        let dets = vec![
            Detection::new("a", "dog", bb(0.0, 0.0, 10.0, 10.0), 0.9, "det").unwrap(),
            Detection::new("a", "cat", bb(20.0, 20.0, 30.0, 30.0), 0.8, "det").unwrap(),
            Detection::new("a", "cat", bb(50.0, 50.0, 60.0, 60.0), 0.3, "det").unwrap(),
        ];
        let cls = vec![
            ClassificationScore::new("a", "dog", 0.7, "cls").unwrap(),
            ClassificationScore::new("a", "cat", 0.6, "cls").unwrap(),
        ];
        let models = build_priors(&truth, &dets, &cls, &PriorOptions::default()).unwrap();
        let keys: Vec<_> = prior_keys(&models).into_iter().collect();
        assert_eq!(
            keys,
            [("cat", "cls"), ("cat", "det"), ("dog", "cls"), ("dog", "det")]
                .map(|(c, s)| (c.to_string(), s.to_string()))
        );
        let cat_cls = models.iter().find(|m| m.class_id() == "cat" && m.source_id() == "cls").unwrap();
        // one broadcast score for both cat boxes: one sample, precision 1/2
        assert_eq!(cat_cls.samples().len(), 1);
        assert_eq!(cat_cls.samples()[0].precision, 0.5);
    }

    #[test]
    fn build_priors_requires_positives() {
        let dets = vec![Detection::new("a", "dog", bb(0.0, 0.0, 1.0, 1.0), 0.9, "det").unwrap()];
        assert!(matches!(
            build_priors(&[], &dets, &[], &PriorOptions::default()),
            Err(Error::Config(_))
        ));
    }

    fn arb_labels() -> impl Strategy<Value = Vec<(f64, bool)>> {
        prop::collection::vec(((0u32..20).prop_map(|s| s as f64 / 20.0), any::<bool>()), 1..40)
    }

    proptest! {
        #[test]
        fn pr_curve_monotone(seq in arb_labels()) {
            let l = labels(&seq);
            let n_pos = seq.iter().filter(|x| x.1).count().max(1);
            let c = build_pr_curve(&l, n_pos).unwrap();
            for w in c.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].recall >= w[0].recall);
                prop_assert!(w[1].precision <= w[0].precision);
            }
        }

        #[test]
        fn lookup_monotone(seq in arb_labels(), a in -0.2..1.2f64, b in -0.2..1.2f64) {
            let l = labels(&seq);
            let n_pos = seq.iter().filter(|x| x.1).count().max(1);
            let m = PriorModel::fit("dog", "det", &l, n_pos, Exponent::default(), 0.5).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (p_lo, r_lo) = m.lookup(lo);
            let (p_hi, r_hi) = m.lookup(hi);
            prop_assert!(p_lo <= p_hi);
            prop_assert!(r_lo >= r_hi);
        }

        #[test]
        fn true_positives_never_exceed_positives(
            boxes in prop::collection::vec((0u8..3, 0.0..50.0f64, 0.0..50.0f64, 0.0..1.0f64), 0..30),
            truths in prop::collection::vec((0u8..3, 0.0..50.0f64, 0.0..50.0f64, any::<bool>()), 0..10),
        ) {
            let dets: Vec<_> = boxes.iter()
                .map(|&(img, x, y, s)| det(&img.to_string(), bb(x, y, x + 10.0, y + 10.0), s))
                .collect();
            let gts: Vec<_> = truths.iter()
                .map(|&(img, x, y, d)| gt(&img.to_string(), bb(x, y, x + 10.0, y + 10.0), d))
                .collect();
            let out = label_detections(&dets, &gts, 0.5).unwrap();
            for img in 0u8..3 {
                let id = img.to_string();
                let tp = out.iter().filter(|l| l.is_true_positive && l.detection.image_id == id).count();
                let n_pos = gts.iter().filter(|g| !g.difficult && g.image_id == id).count();
                prop_assert!(tp <= n_pos);
            }
        }
    }
}
