#![allow(dead_code)]

use dbf::eval::{evaluate, ApMethod, EvaluationReport};
use dbf::fusion::{fuse_dataset, PriorSet, DEFAULT_CLUSTER_IOU};
use dbf::prior::{build_priors, PriorOptions};
use dbf::synth::{generate, SyntheticConfig};
use dbf::Detection;

pub struct GainRun {
    pub detector: EvaluationReport,
    pub fused: EvaluationReport,
}

impl GainRun {
    pub fn gain(&self) -> f64 {
        self.fused.map_score - self.detector.map_score
    }
}

/// Priors on `val`, fusion and evaluation on `test`. With `use_classifier`
/// false the classifier contributes no records, i.e. vacuous mass everywhere.
pub fn run_gain(config: &SyntheticConfig, use_classifier: bool) -> GainRun {
    let data = generate(config).expect("generate");
    let val = data.partition("val").expect("val split");
    let test = data.partition("test").expect("test split");
    let options = PriorOptions::default();
    let priors = build_priors(&val.ground_truth, &val.detections, &val.classification, &options).expect("priors");
    let priors = PriorSet::new(priors);
    let cls = if use_classifier { test.classification.as_slice() } else { &[] };
    let fused = fuse_dataset(&test.detections, cls, &priors, DEFAULT_CLUSTER_IOU).expect("fuse");
    let fused_dets: Vec<Detection> = fused.iter().map(|f| f.to_detection("fused")).collect();
    GainRun {
        detector: evaluate(&test.detections, &test.ground_truth, 0.5, ApMethod::Continuous).expect("eval"),
        fused: evaluate(&fused_dets, &test.ground_truth, 0.5, ApMethod::Continuous).expect("eval"),
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
