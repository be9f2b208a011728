//! End to end in memory: priors on val, fusion and evaluation on test,
//! for a false-positive-heavy and a clean detector.
//!
//! ```text
//! cargo run --release --example fuse_synthetic
//! ```

use dbf::eval::{evaluate, ApMethod};
use dbf::fusion::{fuse_dataset, PriorSet, DEFAULT_CLUSTER_IOU};
use dbf::prior::{build_priors, PriorOptions, DEFAULT_IOU_THRESHOLD};
use dbf::synth::{generate, BetaParams, SourceProfile, SyntheticConfig};
use dbf::Detection;

fn run(label: &str, detector: SourceProfile) -> dbf::Result<()> {
    let mut config = SyntheticConfig::fusion_benchmark(2024);
    config.detectors = vec![detector];
    let data = generate(&config)?;
    let val = data.partition("val").expect("val split");
    let test = data.partition("test").expect("test split");

    let models = build_priors(&val.ground_truth, &val.detections, &val.classification, &PriorOptions::default())?;
    let fused = fuse_dataset(&test.detections, &test.classification, &PriorSet::new(models), DEFAULT_CLUSTER_IOU)?;
    let fused: Vec<Detection> = fused.iter().map(|f| f.to_detection("fused")).collect();

    let before = evaluate(&test.detections, &test.ground_truth, DEFAULT_IOU_THRESHOLD, ApMethod::Continuous)?;
    let after = evaluate(&fused, &test.ground_truth, DEFAULT_IOU_THRESHOLD, ApMethod::Continuous)?;
    println!("{label}");
    for (class, r) in &before.per_class {
        println!("  {class:<8} {:.4} -> {:.4}", r.ap, after.ap(class).unwrap_or(0.0));
    }
    println!("  {:<8} {:.4} -> {:.4} ({:+.4})\n", "mAP", before.map_score, after.map_score, after.map_score - before.map_score);
    Ok(())
}

fn main() -> dbf::Result<()> {
    run("fp-heavy detector (6 false positives per image and class)", SourceProfile::fp_heavy("detector", 6.0))?;
    run(
        "clean detector (1 false positive, separated scores)",
        SourceProfile {
            tp_score_dist: BetaParams::new(6.0, 2.0),
            fp_score_dist: BetaParams::new(2.0, 5.0),
            ..SourceProfile::fp_heavy("detector", 1.0)
        },
    )
}
