//! Greedy true/false positive labeling of a handful of detections.
//!
//! ```text
//! cargo run --example iou_matching
//! ```

use dbf::prior::label_detections;
use dbf::{iou, BoundingBox, Detection, GroundTruthObject};

fn main() -> dbf::Result<()> {
    let gt = [
        GroundTruthObject::new("img1", "car", BoundingBox::new(10.0, 10.0, 110.0, 60.0)?, false)?,
        GroundTruthObject::new("img1", "car", BoundingBox::new(200.0, 20.0, 280.0, 80.0)?, false)?,
        GroundTruthObject::new("img1", "car", BoundingBox::new(400.0, 40.0, 430.0, 60.0)?, true)?,
    ];
    let dets = [
        Detection::new("img1", "car", BoundingBox::new(12.0, 8.0, 108.0, 62.0)?, 0.92, "det")?,
        Detection::new("img1", "car", BoundingBox::new(30.0, 15.0, 120.0, 65.0)?, 0.81, "det")?,
        Detection::new("img1", "car", BoundingBox::new(205.0, 25.0, 275.0, 90.0)?, 0.64, "det")?,
        Detection::new("img1", "car", BoundingBox::new(401.0, 41.0, 429.0, 61.0)?, 0.40, "det")?,
        Detection::new("img1", "car", BoundingBox::new(500.0, 300.0, 560.0, 340.0)?, 0.35, "det")?,
    ];

    println!("pairwise IoU (rows: detections, cols: ground truth)");
    for d in &dets {
        let row: Vec<String> = gt.iter().map(|g| format!("{:.3}", iou(&d.bbox, &g.bbox))).collect();
        println!("  {:.2}  {}", d.score, row.join("  "));
    }

    // the 0.40 detection only hits a difficult box and is dropped
    let labeled = label_detections(&dets, &gt, 0.5)?;
    println!("\nlabels at IoU 0.5");
    for l in &labeled {
        let tag = if l.is_true_positive { "TP" } else { "FP" };
        println!("  {:.2}  {tag}  {:?}", l.detection.score, l.detection.bbox.to_array());
    }
    Ok(())
}
