//! Deterministic synthetic benchmarks: ground truth, detectors with
//! controllable hit rate and false-positive load, and an image classifier.
//!
//! Randomness is split hierarchically: every (image, lane) pair gets its
//! own ChaCha stream seeded from a hash of the dataset seed, the global
//! image index and the lane name. Lanes are `ground-truth`,
//! `detector:<id>` and `classifier:<id>`, so adding or removing a source
//! leaves every other source's draws untouched.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox, ClassificationScore, Detection, GroundTruthObject};
use crate::io::{self, DatasetBundle};

const MAX_PLACEMENT_TRIES: usize = 1000;
/// False positives never overlap ground truth at or above this IoU.
pub const FP_MAX_IOU: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    fn distribution(&self, what: &str) -> Result<Beta<f64>> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Config(format!("{what}: Beta parameters must be positive, got {self:?}")));
        }
        Beta::new(self.alpha, self.beta).map_err(|e| Error::Config(format!("{what}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceProfile {
    pub source_id: String,
    /// Probability that a ground-truth object is detected.
    pub tp_recall: f64,
    /// Mean number of spurious boxes per image and class (Poisson).
    pub fp_rate: f64,
    pub tp_score_dist: BetaParams,
    pub fp_score_dist: BetaParams,
    /// Corner perturbation of true-positive boxes, relative to box size.
    pub localization_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierProfile {
    pub source_id: String,
    pub pos_score_dist: BetaParams,
    pub neg_score_dist: BetaParams,
}

/// Objects per image for a class that is present, uniform on `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectCount {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub name: String,
    pub n_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_images: usize,
    /// `[width, height]`.
    pub image_size: [f64; 2],
    pub classes: Vec<String>,
    pub objects_per_image: ObjectCount,
    /// Probability that a class appears in an image at all.
    pub class_presence: f64,
    /// Object side length as a fraction of the image side, `[min, max]`.
    #[serde(default = "default_box_scale")]
    pub box_scale: [f64; 2],
    pub detectors: Vec<SourceProfile>,
    pub classifier: ClassifierProfile,
    pub seed: u64,
    /// Consecutive image ranges; defaults to a 1:1:2 train/val/test split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<Vec<PartitionSpec>>,
}

fn default_box_scale() -> [f64; 2] {
    [0.1, 0.25]
}

impl SyntheticConfig {
    /// The FP-heavy benchmark regime: three classes, a detector that finds
    /// 80% of objects but emits four spurious boxes per image and class with
    /// overlapping score distributions, and a discriminative classifier.
    /// 500 validation and 500 test images.
    pub fn fusion_benchmark(seed: u64) -> Self {
        Self {
            n_images: 1000,
            image_size: [640.0, 480.0],
            classes: ["car", "dog", "person"].map(String::from).to_vec(),
            objects_per_image: ObjectCount { min: 1, max: 3 },
            class_presence: 0.4,
            box_scale: default_box_scale(),
            detectors: vec![SourceProfile::fp_heavy("detector", 4.0)],
            classifier: ClassifierProfile {
                source_id: "classifier".to_string(),
                pos_score_dist: BetaParams::new(8.0, 2.0),
                neg_score_dist: BetaParams::new(2.0, 8.0),
            },
            seed,
            partitions: Some(vec![
                PartitionSpec { name: "val".to_string(), n_images: 500 },
                PartitionSpec { name: "test".to_string(), n_images: 500 },
            ]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_images < 1 {
            return bad("n_images must be >= 1".into());
        }
        let [w, h] = self.image_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return bad(format!("image_size must be positive, got {:?}", self.image_size));
        }
        if self.classes.is_empty() || self.classes.iter().any(String::is_empty) {
            return bad("classes must be a non-empty list of non-empty names".into());
        }
        if self.objects_per_image.min > self.objects_per_image.max {
            return bad("objects_per_image.min exceeds max".into());
        }
        if !(0.0..=1.0).contains(&self.class_presence) {
            return bad(format!("class_presence {} outside [0, 1]", self.class_presence));
        }
        let [lo, hi] = self.box_scale;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("box_scale must satisfy 0 < min <= max <= 1, got {:?}", self.box_scale));
        }
        let mut ids = BTreeSet::new();
        for d in &self.detectors {
            if d.source_id.is_empty() || !ids.insert(d.source_id.as_str()) {
                return bad(format!("detector source ids must be unique and non-empty (`{}`)", d.source_id));
            }
            if !(0.0..=1.0).contains(&d.tp_recall) {
                return bad(format!("{}: tp_recall {} outside [0, 1]", d.source_id, d.tp_recall));
            }
            if !(d.fp_rate >= 0.0 && d.fp_rate.is_finite()) {
                return bad(format!("{}: fp_rate must be >= 0", d.source_id));
            }
            if !(d.localization_jitter >= 0.0 && d.localization_jitter.is_finite()) {
                return bad(format!("{}: localization_jitter must be >= 0", d.source_id));
            }
            d.tp_score_dist.distribution(&d.source_id)?;
            d.fp_score_dist.distribution(&d.source_id)?;
        }
        if self.classifier.source_id.is_empty() || ids.contains(self.classifier.source_id.as_str()) {
            return bad("classifier source id must be non-empty and distinct from detectors".into());
        }
        self.classifier.pos_score_dist.distribution(&self.classifier.source_id)?;
        self.classifier.neg_score_dist.distribution(&self.classifier.source_id)?;
        if let Some(parts) = &self.partitions {
            let total: usize = parts.iter().map(|p| p.n_images).sum();
            if total != self.n_images {
                return bad(format!("partition sizes sum to {total}, n_images is {}", self.n_images));
            }
            let mut names = BTreeSet::new();
            if parts.iter().any(|p| p.name.is_empty() || !names.insert(p.name.as_str())) {
                return bad("partition names must be unique and non-empty".into());
            }
        }
        Ok(())
    }

    pub fn resolved_partitions(&self) -> Vec<PartitionSpec> {
        match &self.partitions {
            Some(p) => p.clone(),
            None => {
                let quarter = self.n_images / 4;
                vec![
                    PartitionSpec { name: "train".into(), n_images: quarter },
                    PartitionSpec { name: "val".into(), n_images: quarter },
                    PartitionSpec { name: "test".into(), n_images: self.n_images - 2 * quarter },
                ]
            }
        }
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

impl SourceProfile {
    /// A detector with 80% recall and overlapping TP/FP score distributions.
    pub fn fp_heavy(source_id: &str, fp_rate: f64) -> Self {
        Self {
            source_id: source_id.to_string(),
            tp_recall: 0.8,
            fp_rate,
            tp_score_dist: BetaParams::new(4.0, 2.0),
            fp_score_dist: BetaParams::new(2.0, 3.0),
            localization_jitter: 0.05,
        }
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn lane_rng(seed: u64, image_index: usize, lane: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((image_index as u64).to_le_bytes());
    h.update(lane.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPartition {
    pub name: String,
    pub bundle: DatasetBundle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub partitions: Vec<GeneratedPartition>,
}

impl SyntheticDataset {
    pub fn partition(&self, name: &str) -> Option<&DatasetBundle> {
        self.partitions.iter().find(|p| p.name == name).map(|p| &p.bundle)
    }

    /// Writes `<dir>/<partition>/{images.txt, groundtruth.jsonl,
    /// detections_<source>.jsonl, classification_<source>.jsonl}` and
    /// returns the written paths.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for part in &self.partitions {
            let root = dir.as_ref().join(&part.name);
            let b = &part.bundle;
            let p = root.join("images.txt");
            io::write_image_list(&p, &b.images)?;
            written.push(p);
            let p = root.join("groundtruth.jsonl");
            io::write_ground_truth(&p, &b.ground_truth)?;
            written.push(p);
            for source in b.detector_sources() {
                let p = root.join(format!("detections_{source}.jsonl"));
                io::write_detections(&p, &b.detections_from(source))?;
                written.push(p);
            }
            let cls_sources: BTreeSet<&str> = b.classification.iter().map(|c| c.source_id.as_str()).collect();
            for source in cls_sources {
                let records: Vec<_> = b.classification.iter().filter(|c| c.source_id == source).cloned().collect();
                let p = root.join(format!("classification_{source}.jsonl"));
                io::write_classification(&p, &records)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

struct Samplers {
    detectors: Vec<(Beta<f64>, Beta<f64>, Option<Poisson<f64>>)>,
    classifier: (Beta<f64>, Beta<f64>),
}

/// Generates every partition of `config`. Output depends only on the config
/// (seed included).
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let samplers = Samplers {
        detectors: config
            .detectors
            .iter()
            .map(|d| {
                let poisson = if d.fp_rate > 0.0 {
                    Some(Poisson::new(d.fp_rate).map_err(|e| Error::Config(format!("{}: {e}", d.source_id)))?)
                } else {
                    None
                };
                Ok((
                    d.tp_score_dist.distribution(&d.source_id)?,
                    d.fp_score_dist.distribution(&d.source_id)?,
                    poisson,
                ))
            })
            .collect::<Result<_>>()?,
        classifier: (
            config.classifier.pos_score_dist.distribution(&config.classifier.source_id)?,
            config.classifier.neg_score_dist.distribution(&config.classifier.source_id)?,
        ),
    };

    let mut partitions = Vec::new();
    let mut index = 0usize;
    for spec in config.resolved_partitions() {
        let mut bundle = DatasetBundle::default();
        for _ in 0..spec.n_images {
            let image_id = format!("{}_{index:06}", spec.name);
            generate_image(config, &samplers, index, &image_id, &mut bundle)?;
            bundle.images.push(image_id);
            index += 1;
        }
        // detections grouped per source for stable per-source files
        bundle.detections.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        partitions.push(GeneratedPartition { name: spec.name, bundle });
    }
    Ok(SyntheticDataset { partitions })
}

fn generate_image(
    config: &SyntheticConfig,
    samplers: &Samplers,
    index: usize,
    image_id: &str,
    bundle: &mut DatasetBundle,
) -> Result<()> {
    let [width, height] = config.image_size;
    let mut rng = lane_rng(config.seed, index, "ground-truth");
    let mut objects: Vec<(usize, BoundingBox)> = Vec::new();
    for (class_idx, _) in config.classes.iter().enumerate() {
        if rng.random::<f64>() >= config.class_presence {
            continue;
        }
        let count = rng.random_range(config.objects_per_image.min..=config.objects_per_image.max);
        for _ in 0..count {
            let b = place(&mut rng, config, |b| objects.iter().all(|(_, o)| b.intersection_area(o) == 0.0))
                .ok_or_else(|| {
                    Error::Generation(format!(
                        "could not place a non-overlapping object in {image_id} after {MAX_PLACEMENT_TRIES} tries"
                    ))
                })?;
            objects.push((class_idx, b));
        }
    }
    for &(class_idx, b) in &objects {
        bundle
            .ground_truth
            .push(GroundTruthObject::new(image_id, &config.classes[class_idx], b, false)?);
    }

    for (profile, (tp_dist, fp_dist, fp_count)) in config.detectors.iter().zip(&samplers.detectors) {
        let mut rng = lane_rng(config.seed, index, &format!("detector:{}", profile.source_id));
        for (class_idx, class_id) in config.classes.iter().enumerate() {
            for &(_, gt) in objects.iter().filter(|(c, _)| *c == class_idx) {
                if rng.random::<f64>() >= profile.tp_recall {
                    continue;
                }
                let b = jitter(&mut rng, &gt, profile.localization_jitter, width, height);
                let score = tp_dist.sample(&mut rng);
                bundle.detections.push(Detection::new(image_id, class_id, b, score, &profile.source_id)?);
            }
            let n_fp = fp_count.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
            for _ in 0..n_fp {
                let b = place(&mut rng, config, |b| objects.iter().all(|(_, o)| iou(b, o) < FP_MAX_IOU))
                    .ok_or_else(|| {
                        Error::Generation(format!(
                            "could not place a false positive away from ground truth in {image_id}"
                        ))
                    })?;
                let score = fp_dist.sample(&mut rng);
                bundle.detections.push(Detection::new(image_id, class_id, b, score, &profile.source_id)?);
            }
        }
    }

    let classifier = &config.classifier;
    let mut rng = lane_rng(config.seed, index, &format!("classifier:{}", classifier.source_id));
    for (class_idx, class_id) in config.classes.iter().enumerate() {
        let present = objects.iter().any(|(c, _)| *c == class_idx);
        let dist = if present { &samplers.classifier.0 } else { &samplers.classifier.1 };
        let score = dist.sample(&mut rng);
        bundle
            .classification
            .push(ClassificationScore::new(image_id, class_id, score, &classifier.source_id)?);
    }
    Ok(())
}

fn place(rng: &mut ChaCha8Rng, config: &SyntheticConfig, accept: impl Fn(&BoundingBox) -> bool) -> Option<BoundingBox> {
    let [width, height] = config.image_size;
    let [lo, hi] = config.box_scale;
    for _ in 0..MAX_PLACEMENT_TRIES {
        let w = width * rng.random_range(lo..=hi);
        let h = height * rng.random_range(lo..=hi);
        let x = rng.random_range(0.0..=(width - w));
        let y = rng.random_range(0.0..=(height - h));
        if let Ok(b) = BoundingBox::new(x, y, x + w, y + h) {
            if accept(&b) {
                return Some(b);
            }
        }
    }
    None
}

fn jitter(rng: &mut ChaCha8Rng, b: &BoundingBox, amount: f64, width: f64, height: f64) -> BoundingBox {
    let mut offsets = [0.0f64; 4];
    for o in offsets.iter_mut() {
        *o = rng.random_range(-1.0..=1.0) * amount;
    }
    let (w, h) = (b.width(), b.height());
    BoundingBox::new(
        (b.x_min() + offsets[0] * w).max(0.0),
        (b.y_min() + offsets[1] * h).max(0.0),
        (b.x_max() + offsets[2] * w).min(width),
        (b.y_max() + offsets[3] * h).min(height),
    )
    .unwrap_or(*b)
}
