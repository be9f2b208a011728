//! Per-class AP and mAP with both AP variants.
//!
//! ```text
//! cargo run --example evaluate_map
//! ```

use dbf::eval::{evaluate, ApMethod};
use dbf::prior::DEFAULT_IOU_THRESHOLD;
use dbf::synth::{generate, SyntheticConfig};

fn main() -> dbf::Result<()> {
    let data = generate(&SyntheticConfig::fusion_benchmark(3))?;
    let test = data.partition("test").expect("test split");
    for method in [ApMethod::Continuous, ApMethod::Voc07_11Point] {
        let report = evaluate(&test.detections, &test.ground_truth, DEFAULT_IOU_THRESHOLD, method)?;
        println!("{method:?}\n{}", report.to_table());
    }
    Ok(())
}
