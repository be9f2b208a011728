//! File formats.
//!
//! Records are UTF-8 JSON Lines, one record per line:
//!
//! * detections: `{"image_id","class_id","bbox":[x_min,y_min,x_max,y_max],"score"}`
//! * ground truth: `{"image_id","class_id","bbox","difficult"}` (`difficult` defaults to false)
//! * classification: `{"image_id","class_id","score"}`
//! * fused output: the detection grammar with `score` holding the fused score,
//!   plus `"fused_score"`, `"mass":[m_t,m_nt,m_amb]` and `"source_score"`
//!
//! The source of a detection or classification file is not stored in the
//! file; readers stamp it on every record. Reals are written in shortest
//! round-trip form, so reading back what was written is exact.
//!
//! VOC result dumps (`image_id score x_min y_min x_max y_max`, one class per
//! file) are accepted through [`read_voc_detections`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusedDetection, MassFunction};
use crate::geometry::{BoundingBox, ClassificationScore, Detection, GroundTruthObject};
use crate::prior::{PrSample, PriorModel};

pub const PRIOR_FILE_SUFFIX: &str = ".prior.json";

/// Everything known about one dataset partition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetBundle {
    /// Declared image universe, in generation or file order.
    pub images: Vec<String>,
    pub ground_truth: Vec<GroundTruthObject>,
    pub detections: Vec<Detection>,
    pub classification: Vec<ClassificationScore>,
}

impl DatasetBundle {
    /// Images declared by ground truth plus the explicit image list.
    pub fn declared_images(&self) -> BTreeSet<&str> {
        self.images
            .iter()
            .map(String::as_str)
            .chain(self.ground_truth.iter().map(|g| g.image_id.as_str()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_image_universe(&self.declared_images(), &self.detections, &self.classification)
    }

    pub fn detector_sources(&self) -> BTreeSet<&str> {
        self.detections.iter().map(|d| d.source_id.as_str()).collect()
    }

    pub fn detections_from(&self, source_id: &str) -> Vec<Detection> {
        self.detections.iter().filter(|d| d.source_id == source_id).cloned().collect()
    }
}

/// Fails on the first detection or classification record whose image is
/// not in `declared`.
pub fn check_image_universe(
    declared: &BTreeSet<&str>,
    dets: &[Detection],
    cls: &[ClassificationScore],
) -> Result<()> {
    let unknown = dets
        .iter()
        .map(|d| (d.image_id.as_str(), d.source_id.as_str()))
        .chain(cls.iter().map(|c| (c.image_id.as_str(), c.source_id.as_str())))
        .find(|(image, _)| !declared.contains(image));
    match unknown {
        Some((image, source)) => Err(Error::Config(format!(
            "image `{image}` from source `{source}` is not in the declared image set"
        ))),
        None => Ok(()),
    }
}

#[derive(Deserialize)]
struct DetectionIn {
    image_id: String,
    class_id: String,
    bbox: [f64; 4],
    score: f64,
}

#[derive(Serialize)]
struct DetectionOut<'a> {
    image_id: &'a str,
    class_id: &'a str,
    bbox: [f64; 4],
    score: f64,
}

#[derive(Deserialize)]
struct GroundTruthIn {
    image_id: String,
    class_id: String,
    bbox: [f64; 4],
    #[serde(default)]
    difficult: bool,
}

#[derive(Serialize)]
struct GroundTruthOut<'a> {
    image_id: &'a str,
    class_id: &'a str,
    bbox: [f64; 4],
    difficult: bool,
}

#[derive(Deserialize)]
struct ClassificationIn {
    image_id: String,
    class_id: String,
    score: f64,
}

#[derive(Serialize)]
struct ClassificationOut<'a> {
    image_id: &'a str,
    class_id: &'a str,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct FusedRecord {
    image_id: String,
    class_id: String,
    bbox: [f64; 4],
    score: f64,
    fused_score: f64,
    mass: [f64; 3],
    source_score: f64,
}

#[derive(Serialize, Deserialize)]
struct PriorMeta {
    iou_threshold: f64,
    n_pos: usize,
    n_det: usize,
}

#[derive(Serialize, Deserialize)]
struct PriorFile {
    class_id: String,
    source_id: String,
    n: u32,
    thresholds: Vec<f64>,
    precision: Vec<f64>,
    recall: Vec<f64>,
    meta: PriorMeta,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Parses each non-blank line with `parse`, attaching the 1-based line
/// number to any failure.
fn read_lines<T>(path: &Path, mut parse: impl FnMut(&str) -> std::result::Result<T, String>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse(&line).map_err(|message| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

fn parse_json<'a, T: Deserialize<'a>>(line: &'a str) -> std::result::Result<T, String> {
    serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))
}

fn parse_box(c: [f64; 4]) -> std::result::Result<BoundingBox, String> {
    BoundingBox::try_from(c).map_err(|_| format!("invalid box {c:?}"))
}

fn finite_score(score: f64) -> std::result::Result<f64, String> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err(format!("non-finite score {score}"))
    }
}

fn write_lines<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    for r in records {
        serde_json::to_writer(&mut w, &r).map_err(json_err)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: impl AsRef<Path>, source_id: &str) -> Result<Vec<Detection>> {
    read_lines(path.as_ref(), |line| {
        let r: DetectionIn = parse_json(line)?;
        let bbox = parse_box(r.bbox)?;
        let score = finite_score(r.score)?;
        Detection::new(r.image_id, r.class_id, bbox, score, source_id).map_err(|e| e.to_string())
    })
}

pub fn write_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    write_lines(
        path.as_ref(),
        dets.iter().map(|d| DetectionOut {
            image_id: &d.image_id,
            class_id: &d.class_id,
            bbox: d.bbox.to_array(),
            score: d.score,
        }),
    )
}

/// Reads a VOC results file for a single class.
pub fn read_voc_detections(path: impl AsRef<Path>, class_id: &str, source_id: &str) -> Result<Vec<Detection>> {
    read_lines(path.as_ref(), |line| {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        }
        let mut nums = [0.0f64; 5];
        for (slot, raw) in nums.iter_mut().zip(&fields[1..]) {
            *slot = raw.parse().map_err(|_| format!("not a number: `{raw}`"))?;
        }
        let score = finite_score(nums[0])?;
        let bbox = parse_box([nums[1], nums[2], nums[3], nums[4]])?;
        Detection::new(fields[0], class_id, bbox, score, source_id).map_err(|e| e.to_string())
    })
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthObject>> {
    read_lines(path.as_ref(), |line| {
        let r: GroundTruthIn = parse_json(line)?;
        let bbox = parse_box(r.bbox)?;
        GroundTruthObject::new(r.image_id, r.class_id, bbox, r.difficult).map_err(|e| e.to_string())
    })
}

pub fn write_ground_truth(path: impl AsRef<Path>, gts: &[GroundTruthObject]) -> Result<()> {
    write_lines(
        path.as_ref(),
        gts.iter().map(|g| GroundTruthOut {
            image_id: &g.image_id,
            class_id: &g.class_id,
            bbox: g.bbox.to_array(),
            difficult: g.difficult,
        }),
    )
}

/// Reads classifier scores; a repeated `(image_id, class_id)` is an error.
pub fn read_classification(path: impl AsRef<Path>, source_id: &str) -> Result<Vec<ClassificationScore>> {
    let mut seen = BTreeSet::new();
    read_lines(path.as_ref(), |line| {
        let r: ClassificationIn = parse_json(line)?;
        let score = finite_score(r.score)?;
        if !seen.insert((r.image_id.clone(), r.class_id.clone())) {
            return Err(format!(
                "duplicate classification for image `{}`, class `{}`",
                r.image_id, r.class_id
            ));
        }
        ClassificationScore::new(r.image_id, r.class_id, score, source_id).map_err(|e| e.to_string())
    })
}

pub fn write_classification(path: impl AsRef<Path>, cls: &[ClassificationScore]) -> Result<()> {
    write_lines(
        path.as_ref(),
        cls.iter().map(|c| ClassificationOut {
            image_id: &c.image_id,
            class_id: &c.class_id,
            score: c.score,
        }),
    )
}

pub fn write_fused(path: impl AsRef<Path>, fused: &[FusedDetection]) -> Result<()> {
    write_lines(
        path.as_ref(),
        fused.iter().map(|f| FusedRecord {
            image_id: f.image_id.clone(),
            class_id: f.class_id.clone(),
            bbox: f.bbox.to_array(),
            score: f.fused_score,
            fused_score: f.fused_score,
            mass: [f.mass.t, f.mass.nt, f.mass.amb],
            source_score: f.source_score,
        }),
    )
}

pub fn read_fused(path: impl AsRef<Path>) -> Result<Vec<FusedDetection>> {
    read_lines(path.as_ref(), |line| {
        let r: FusedRecord = parse_json(line)?;
        let bbox = parse_box(r.bbox)?;
        let [t, nt, amb] = r.mass;
        let mass = MassFunction::new(t, nt, amb).map_err(|e| e.to_string())?;
        let fused = FusedDetection::new(r.image_id, r.class_id, bbox, mass, finite_score(r.source_score)?);
        if fused.fused_score != r.fused_score || r.score != r.fused_score {
            return Err("fused_score does not equal m_t - m_nt".to_string());
        }
        Ok(fused)
    })
}

/// One image id per non-blank line.
pub fn read_image_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_lines(path.as_ref(), |line| Ok(line.trim().to_string()))
}

pub fn write_image_list(path: impl AsRef<Path>, images: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for image in images {
        writeln!(w, "{image}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn prior_to_json(model: &PriorModel) -> String {
    let file = PriorFile {
        class_id: model.class_id().to_string(),
        source_id: model.source_id().to_string(),
        n: model.n(),
        thresholds: model.samples().iter().map(|s| s.threshold).collect(),
        precision: model.samples().iter().map(|s| s.precision).collect(),
        recall: model.samples().iter().map(|s| s.recall).collect(),
        meta: PriorMeta {
            iou_threshold: model.iou_threshold(),
            n_pos: model.n_pos(),
            n_det: model.n_det(),
        },
    };
    let mut json = serde_json::to_string_pretty(&file).expect("prior model serializes");
    json.push('\n');
    json
}

pub fn prior_from_json(json: &str) -> Result<PriorModel> {
    let file: PriorFile = serde_json::from_str(json).map_err(|e| Error::invalid(format!("malformed prior model: {e}")))?;
    let len = file.thresholds.len();
    if file.precision.len() != len || file.recall.len() != len {
        return Err(Error::invalid(format!(
            "prior model arrays differ in length: thresholds {len}, precision {}, recall {}",
            file.precision.len(),
            file.recall.len()
        )));
    }
    let samples = (0..len)
        .map(|i| PrSample {
            threshold: file.thresholds[i],
            precision: file.precision[i],
            recall: file.recall[i],
        })
        .collect();
    PriorModel::new(
        file.class_id,
        file.source_id,
        samples,
        file.n,
        file.meta.n_pos,
        file.meta.n_det,
        file.meta.iou_threshold,
    )
}

pub fn write_prior_model(model: &PriorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(prior_to_json(model).as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_prior_model(path: impl AsRef<Path>) -> Result<PriorModel> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    prior_from_json(&json).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })
}

/// File name used for a model inside a prior directory.
pub fn prior_file_name(class_id: &str, source_id: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect()
    };
    format!("{}__{}{PRIOR_FILE_SUFFIX}", clean(class_id), clean(source_id))
}

/// Writes every model into `dir` and returns the paths, in model order.
pub fn write_prior_dir(dir: impl AsRef<Path>, models: &[PriorModel]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    models
        .iter()
        .map(|m| {
            let path = dir.join(prior_file_name(m.class_id(), m.source_id()));
            write_prior_model(m, &path).map(|_| path)
        })
        .collect()
}

/// Loads every `*.prior.json` in `dir`, sorted by file name.
pub fn read_prior_dir(dir: impl AsRef<Path>) -> Result<Vec<PriorModel>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(PRIOR_FILE_SUFFIX)))
        .collect();
    paths.sort();
    let mut seen = BTreeMap::new();
    let mut models = Vec::with_capacity(paths.len());
    for path in paths {
        let model = read_prior_model(&path)?;
        let key = (model.class_id().to_string(), model.source_id().to_string());
        if let Some(previous) = seen.insert(key, path.clone()) {
            return Err(Error::Config(format!(
                "{} and {} both hold the prior for class `{}`, source `{}`",
                previous.display(),
                path.display(),
                model.class_id(),
                model.source_id()
            )));
        }
        models.push(model);
    }
    Ok(models)
}
