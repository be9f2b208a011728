//! Evidence combination over the frame `{T, NT, T or NT}`.
//!
//! Each source's raw score becomes a mass function through its prior model:
//! `m(T) = prec(s)`, `m(NT) = rec(s)^n` and the remainder on `T or NT`.
//! Masses from all sources covering one box cluster are pooled with
//! Dempster's rule and the fused score is `m(T) - m(NT)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox, ClassificationScore, Detection};
use crate::prior::{rank_by_score, PriorModel};

pub const DEFAULT_CLUSTER_IOU: f64 = 0.5;
/// Minimum ambiguity mass kept on every non-vacuous source mass before
/// pipeline combination.
pub const AMBIGUITY_FLOOR: f64 = 1e-6;
/// Normalizers at or below this are treated as complete conflict.
pub const CONFLICT_EPSILON: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-9;

/// Basic probability assignment on target, non-target and ambiguity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassFunction {
    pub t: f64,
    pub nt: f64,
    pub amb: f64,
}

impl MassFunction {
    pub const VACUOUS: MassFunction = MassFunction {
        t: 0.0,
        nt: 0.0,
        amb: 1.0,
    };

    pub fn new(t: f64, nt: f64, amb: f64) -> Result<Self> {
        let m = Self { t, nt, amb };
        if [t, nt, amb].iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("mass outside [0, 1]: {m:?}")));
        }
        if (t + nt + amb - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("masses do not sum to 1: {m:?}")));
        }
        Ok(m)
    }

    pub fn vacuous() -> Self {
        Self::VACUOUS
    }

    pub fn is_vacuous(&self) -> bool {
        *self == Self::VACUOUS
    }

    /// `m(T) - m(NT)`, in `[-1, 1]`.
    pub fn score(&self) -> f64 {
        self.t - self.nt
    }

    /// Raises the ambiguity mass to at least `floor`, rescaling `t` and `nt`
    /// proportionally. Vacuous and already-ambiguous masses are unchanged.
    pub fn floor_ambiguity(&self, floor: f64) -> Self {
        if self.amb >= floor {
            return *self;
        }
        let scale = (1.0 - floor) / (self.t + self.nt);
        Self {
            t: self.t * scale,
            nt: self.nt * scale,
            amb: floor,
        }
    }
}

/// Mass function from a `(precision, recall)` pair and ambiguity exponent.
///
/// `m(NT)` is capped at `1 - precision` so the ambiguity mass never goes
/// negative; `m(T)` is always the precision.
pub fn mass_from_pr(precision: f64, recall: f64, n: u32) -> MassFunction {
    let t = precision.clamp(0.0, 1.0);
    let nt = recall.clamp(0.0, 1.0).powi(n as i32).min(1.0 - t);
    let amb = (1.0 - t - nt).max(0.0);
    MassFunction { t, nt, amb }
}

/// Mass for score `s` under `model`; `None` means no evidence and yields
/// the vacuous mass.
pub fn assign_masses(model: &PriorModel, s: Option<f64>) -> MassFunction {
    match s {
        None => MassFunction::VACUOUS,
        Some(s) => {
            let (precision, recall) = model.lookup(s);
            mass_from_pr(precision, recall, model.n())
        }
    }
}

/// Dempster's rule of combination on the three-element frame.
pub fn dempster_combine(a: &MassFunction, b: &MassFunction) -> Result<MassFunction> {
    let conflict = a.t * b.nt + a.nt * b.t;
    let normalizer = 1.0 - conflict;
    if normalizer <= CONFLICT_EPSILON {
        return Err(Error::CompleteConflict { normalizer });
    }
    Ok(MassFunction {
        t: (a.t * b.t + a.t * b.amb + a.amb * b.t) / normalizer,
        nt: (a.nt * b.nt + a.nt * b.amb + a.amb * b.nt) / normalizer,
        amb: a.amb * b.amb / normalizer,
    })
}

/// Boxes of one class in one image grouped across detectors, at most one
/// per source.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCluster {
    pub image_id: String,
    pub class_id: String,
    pub members: BTreeMap<String, Detection>,
    representative: String,
}

impl DetectionCluster {
    /// The member from the highest-scoring detector (the cluster seed).
    pub fn representative(&self) -> &Detection {
        &self.members[&self.representative]
    }

    pub fn representative_bbox(&self) -> BoundingBox {
        self.representative().bbox
    }
}

/// Greedy cross-source clustering of single-class detections.
///
/// Per image, the highest-scoring unassigned detection seeds a cluster and
/// absorbs, from every other source, that source's unassigned detection of
/// highest IoU if it reaches `cluster_iou`.
pub fn cluster_detections(dets: &[Detection], cluster_iou: f64) -> Result<Vec<DetectionCluster>> {
    if !(cluster_iou > 0.0 && cluster_iou < 1.0) {
        return Err(Error::invalid(format!("cluster iou {cluster_iou} outside (0, 1)")));
    }
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.class_id != first.class_id) {
            return Err(Error::invalid(format!(
                "expected a single class, found `{}` and `{}`",
                first.class_id, other.class_id
            )));
        }
    }
    let mut by_image: BTreeMap<&str, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        by_image.entry(d.image_id.as_str()).or_default().push(d.clone());
    }
    let mut clusters = Vec::new();
    for image_dets in by_image.values() {
        clusters.extend(cluster_image(image_dets, cluster_iou));
    }
    Ok(clusters)
}

fn cluster_image(dets: &[Detection], cluster_iou: f64) -> Vec<DetectionCluster> {
    let ranked = rank_by_score(dets, |d| d.score);
    let sources: BTreeSet<&str> = ranked.iter().map(|d| d.source_id.as_str()).collect();
    let mut assigned = vec![false; ranked.len()];
    let mut clusters = Vec::new();
    for seed_idx in 0..ranked.len() {
        if assigned[seed_idx] {
            continue;
        }
        assigned[seed_idx] = true;
        let seed = ranked[seed_idx];
        let mut members = BTreeMap::new();
        members.insert(seed.source_id.clone(), seed.clone());
        for &source in sources.iter().filter(|s| **s != seed.source_id) {
            let mut best: Option<(usize, f64)> = None;
            for (i, d) in ranked.iter().enumerate() {
                if assigned[i] || d.source_id != source {
                    continue;
                }
                let overlap = iou(&seed.bbox, &d.bbox);
                if overlap >= cluster_iou && best.is_none_or(|(_, o)| overlap > o) {
                    best = Some((i, overlap));
                }
            }
            if let Some((i, _)) = best {
                assigned[i] = true;
                members.insert(source.to_string(), ranked[i].clone());
            }
        }
        clusters.push(DetectionCluster {
            image_id: seed.image_id.clone(),
            class_id: seed.class_id.clone(),
            members,
            representative: seed.source_id.clone(),
        });
    }
    clusters
}

/// One fused output box.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDetection {
    pub image_id: String,
    pub class_id: String,
    pub bbox: BoundingBox,
    pub fused_score: f64,
    pub mass: MassFunction,
    /// Raw score of the representative detector member.
    pub source_score: f64,
}

impl FusedDetection {
    pub fn new(
        image_id: impl Into<String>,
        class_id: impl Into<String>,
        bbox: BoundingBox,
        mass: MassFunction,
        source_score: f64,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            class_id: class_id.into(),
            bbox,
            fused_score: mass.score(),
            mass,
            source_score,
        }
    }

    /// The fused box as a plain detection scored by `fused_score`.
    pub fn to_detection(&self, source_id: &str) -> Detection {
        Detection {
            image_id: self.image_id.clone(),
            class_id: self.class_id.clone(),
            bbox: self.bbox,
            score: self.fused_score,
            source_id: source_id.to_string(),
        }
    }
}

/// Prior models keyed by `(class_id, source_id)`.
#[derive(Debug, Clone, Default)]
pub struct PriorSet {
    models: BTreeMap<(String, String), PriorModel>,
}

impl PriorSet {
    pub fn new(models: impl IntoIterator<Item = PriorModel>) -> Self {
        Self {
            models: models
                .into_iter()
                .map(|m| ((m.class_id().to_string(), m.source_id().to_string()), m))
                .collect(),
        }
    }

    pub fn get(&self, class_id: &str, source_id: &str) -> Option<&PriorModel> {
        self.models.get(&(class_id.to_string(), source_id.to_string()))
    }

    fn require(&self, class_id: &str, source_id: &str) -> Result<&PriorModel> {
        self.get(class_id, source_id).ok_or_else(|| Error::MissingPrior {
            class_id: class_id.to_string(),
            source_id: source_id.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PriorModel> {
        self.models.values()
    }
}

struct ClassPlan<'a> {
    class_id: &'a str,
    detectors: Vec<(&'a str, &'a PriorModel)>,
    classifiers: Vec<(&'a str, &'a PriorModel, BTreeMap<&'a str, f64>)>,
}

/// Fuses detector detections (any number of sources) with classifier
/// scores.
///
/// Per class, boxes are clustered across detectors. Every cluster gets one
/// mass per detector source (vacuous when the source has no member) and one
/// per classifier source (vacuous when the image has no record). Non-vacuous
/// masses get their ambiguity floored at [`AMBIGUITY_FLOOR`], then all are
/// combined left to right: detectors by source id, classifiers last.
///
/// Output is sorted by class, fused score descending, representative raw
/// score descending, image id and box, so that evaluation tie-breaking by
/// input order falls back on the detector ranking.
pub fn fuse_dataset(
    dets: &[Detection],
    cls: &[ClassificationScore],
    priors: &PriorSet,
    cluster_iou: f64,
) -> Result<Vec<FusedDetection>> {
    let mut det_groups: BTreeMap<&str, BTreeMap<&str, Vec<Detection>>> = BTreeMap::new();
    for d in dets {
        det_groups
            .entry(d.class_id.as_str())
            .or_default()
            .entry(d.image_id.as_str())
            .or_default()
            .push(d.clone());
    }
    let mut det_sources: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for d in dets {
        det_sources.entry(d.class_id.as_str()).or_default().insert(d.source_id.as_str());
    }
    let mut cls_scores: BTreeMap<&str, BTreeMap<&str, BTreeMap<&str, f64>>> = BTreeMap::new();
    for c in cls {
        cls_scores
            .entry(c.class_id.as_str())
            .or_default()
            .entry(c.source_id.as_str())
            .or_default()
            .insert(c.image_id.as_str(), c.score);
    }

    // resolve every prior up front so a missing one fails before any work
    let mut plans = BTreeMap::new();
    for (&class_id, sources) in &det_sources {
        let detectors = sources
            .iter()
            .map(|&s| priors.require(class_id, s).map(|m| (s, m)))
            .collect::<Result<Vec<_>>>()?;
        let classifiers = cls_scores
            .get(class_id)
            .map(|by_source| {
                by_source
                    .iter()
                    .map(|(&s, scores)| priors.require(class_id, s).map(|m| (s, m, scores.clone())))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_default();
        plans.insert(
            class_id,
            ClassPlan {
                class_id,
                detectors,
                classifiers,
            },
        );
    }

    let partitions: Vec<(&ClassPlan, &str, &Vec<Detection>)> = det_groups
        .iter()
        .flat_map(|(class_id, images)| {
            let plan = &plans[class_id];
            images.iter().map(move |(image_id, d)| (plan, *image_id, d))
        })
        .collect();

    let mut fused = partitions
        .par_iter()
        .map(|(plan, image_id, image_dets)| fuse_image(plan, image_id, image_dets, cluster_iou))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    fused.sort_by(compare_fused);
    Ok(fused)
}

fn fuse_image(
    plan: &ClassPlan,
    image_id: &str,
    dets: &[Detection],
    cluster_iou: f64,
) -> Result<Vec<FusedDetection>> {
    let clusters = cluster_detections(dets, cluster_iou)?;
    clusters
        .iter()
        .map(|cluster| {
            let mut masses = Vec::with_capacity(plan.detectors.len() + plan.classifiers.len());
            for &(source, model) in &plan.detectors {
                masses.push(assign_masses(model, cluster.members.get(source).map(|d| d.score)));
            }
            for (_, model, scores) in &plan.classifiers {
                masses.push(assign_masses(model, scores.get(image_id).copied()));
            }
            let mass = combine_all(masses)?;
            let rep = cluster.representative();
            Ok(FusedDetection::new(image_id, plan.class_id, rep.bbox, mass, rep.score))
        })
        .collect()
}

/// Left fold of Dempster's rule after ambiguity flooring.
pub fn combine_all(masses: impl IntoIterator<Item = MassFunction>) -> Result<MassFunction> {
    masses.into_iter().try_fold(MassFunction::VACUOUS, |acc, m| {
        let m = if m.is_vacuous() { m } else { m.floor_ambiguity(AMBIGUITY_FLOOR) };
        dempster_combine(&acc, &m)
    })
}

fn compare_fused(a: &FusedDetection, b: &FusedDetection) -> Ordering {
    a.class_id
        .cmp(&b.class_id)
        .then(b.fused_score.total_cmp(&a.fused_score))
        .then(b.source_score.total_cmp(&a.source_score))
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.bbox.cmp_coords(&b.bbox))
}
