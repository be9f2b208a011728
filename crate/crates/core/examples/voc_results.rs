//! Reads per-class VOC results files (`image score x1 y1 x2 y2`) and
//! evaluates them.
//!
//! ```text
//! cargo run --example voc_results
//! ```

use std::fmt::Write as _;

use dbf::eval::{evaluate, ApMethod};
use dbf::io;
use dbf::synth::{generate, SyntheticConfig};

fn main() -> dbf::Result<()> {
    let mut config = SyntheticConfig::fusion_benchmark(5);
    config.n_images = 200;
    config.partitions = None;
    let data = generate(&config)?;
    let test = data.partition("test").expect("test split");

    let dir = std::env::temp_dir().join("dbf-voc-example");
    std::fs::create_dir_all(&dir).map_err(|e| dbf::Error::Invalid(e.to_string()))?;
    let mut dets = Vec::new();
    for class in &config.classes {
        let mut text = String::new();
        for d in test.detections.iter().filter(|d| &d.class_id == class) {
            let [x1, y1, x2, y2] = d.bbox.to_array();
            writeln!(text, "{} {:.6} {x1:.1} {y1:.1} {x2:.1} {y2:.1}", d.image_id, d.score).unwrap();
        }
        let path = dir.join(format!("comp4_det_test_{class}.txt"));
        std::fs::write(&path, text).map_err(|e| dbf::Error::Invalid(e.to_string()))?;
        let read = io::read_voc_detections(&path, class, "detector")?;
        println!("{}: {} detections", path.display(), read.len());
        dets.extend(read);
    }
    let report = evaluate(&dets, &test.ground_truth, 0.5, ApMethod::Voc07_11Point)?;
    println!("\n{}", report.to_table());
    Ok(())
}
