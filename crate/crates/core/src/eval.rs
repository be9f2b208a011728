//! VOC-style average precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Detection, GroundTruthObject};
use crate::prior::{build_pr_curve, label_detections, LabeledDetection, PrSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMethod {
    /// Area under the interpolated precision-recall staircase.
    #[default]
    Continuous,
    /// Mean interpolated precision at recall 0.0, 0.1, ..., 1.0.
    Voc07_11Point,
}

impl std::str::FromStr for ApMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(ApMethod::Continuous),
            "voc07" | "voc07_11point" => Ok(ApMethod::Voc07_11Point),
            other => Err(Error::invalid(format!("unknown AP method `{other}`"))),
        }
    }
}

/// AP of a ranked list. `labeled` is read in order; use the output of
/// [`label_detections`], which is already ranked.
pub fn average_precision(labeled: &[LabeledDetection], n_pos: usize, method: ApMethod) -> Result<f64> {
    if n_pos == 0 {
        return Err(Error::invalid("average precision needs at least one positive"));
    }
    let mut precision = Vec::with_capacity(labeled.len());
    let mut recall = Vec::with_capacity(labeled.len());
    let mut tp = 0usize;
    for (i, l) in labeled.iter().enumerate() {
        tp += l.is_true_positive as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_pos as f64);
    }
    // interpolated precision: max over this and every later position
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let ap = match method {
        ApMethod::Continuous => {
            let sum: f64 = labeled
                .iter()
                .zip(&precision)
                .filter(|(l, _)| l.is_true_positive)
                .map(|(_, p)| p)
                .sum();
            sum / n_pos as f64
        }
        ApMethod::Voc07_11Point => {
            let total: f64 = (0..=10)
                .map(|k| {
                    let r = k as f64 / 10.0;
                    // precision is non-increasing, so the first qualifying index is the max
                    recall.iter().position(|&x| x >= r).map_or(0.0, |i| precision[i])
                })
                .sum();
            total / 11.0
        }
    };
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub ap: f64,
    pub n_pos: usize,
    pub n_det: usize,
    #[serde(skip)]
    pub pr_samples: Vec<PrSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_class: BTreeMap<String, ClassReport>,
    #[serde(rename = "map")]
    pub map_score: f64,
    pub ap_method: ApMethod,
    pub iou_threshold: f64,
    /// Classes with detections but no non-difficult ground truth.
    pub skipped_classes: Vec<String>,
}

/// Per-class AP and mAP. Classes without non-difficult ground truth are
/// skipped and left out of the mean.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    iou_threshold: f64,
    method: ApMethod,
) -> Result<EvaluationReport> {
    let mut classes: BTreeMap<&str, (Vec<Detection>, Vec<GroundTruthObject>)> = BTreeMap::new();
    for d in dets {
        classes.entry(d.class_id.as_str()).or_default().0.push(d.clone());
    }
    for g in gts {
        classes.entry(g.class_id.as_str()).or_default().1.push(g.clone());
    }
    let jobs: Vec<_> = classes.into_iter().collect();
    let results = jobs
        .par_iter()
        .map(|(class_id, (d, g))| {
            let n_pos = g.iter().filter(|g| !g.difficult).count();
            if n_pos == 0 {
                return Ok((class_id.to_string(), None));
            }
            let labeled = label_detections(d, g, iou_threshold)?;
            let ap = average_precision(&labeled, n_pos, method)?;
            let pr_samples = if labeled.is_empty() {
                Vec::new()
            } else {
                build_pr_curve(&labeled, n_pos)?
            };
            Ok((
                class_id.to_string(),
                Some(ClassReport {
                    ap,
                    n_pos,
                    n_det: labeled.len(),
                    pr_samples,
                }),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_class = BTreeMap::new();
    let mut skipped_classes = Vec::new();
    for (class_id, report) in results {
        match report {
            Some(r) => {
                per_class.insert(class_id, r);
            }
            None => {
                log::warn!("class `{class_id}` has no non-difficult ground truth; skipped");
                skipped_classes.push(class_id);
            }
        }
    }
    let map_score = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().map(|r| r.ap).sum::<f64>() / per_class.len() as f64
    };
    Ok(EvaluationReport {
        per_class,
        map_score,
        ap_method: method,
        iou_threshold,
        skipped_classes,
    })
}

impl EvaluationReport {
    pub fn ap(&self, class_id: &str) -> Option<f64> {
        self.per_class.get(class_id).map(|r| r.ap)
    }

    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }

    /// Aligned plain-text table: class, AP, n_pos, then the mAP row.
    pub fn to_table(&self) -> String {
        let width = self
            .per_class
            .keys()
            .map(String::len)
            .chain(std::iter::once("class".len()))
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>7}", "class", "AP", "n_pos");
        for (class_id, r) in &self.per_class {
            let _ = writeln!(out, "{class_id:<width$}  {:>8.4}  {:>7}", r.ap, r.n_pos);
        }
        let _ = writeln!(out, "{:<width$}  {:>8.4}", "mAP", self.map_score);
        out
    }

    /// Writes `<class>.pr.csv` per class with `threshold,precision,recall` rows.
    pub fn write_pr_csvs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (class_id, r) in &self.per_class {
            let mut csv = String::from("threshold,precision,recall\n");
            for s in &r.pr_samples {
                let _ = writeln!(csv, "{},{},{}", s.threshold, s.precision, s.recall);
            }
            let path = dir.join(format!("{class_id}.pr.csv"));
            std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
