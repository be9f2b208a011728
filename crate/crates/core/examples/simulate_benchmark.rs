//! Generates the synthetic fusion benchmark and writes it to disk.
//!
//! ```text
//! cargo run --example simulate_benchmark -- [OUT_DIR] [SEED]
//! ```

use dbf::synth::{generate, SyntheticConfig};

fn main() -> dbf::Result<()> {
    let mut args = std::env::args().skip(1);
    let out_dir = args.next().unwrap_or_else(|| "target/example-sim".into());
    let seed = args.next().map_or(Ok(0), |s| s.parse()).expect("seed must be an integer");

    let config = SyntheticConfig::fusion_benchmark(seed);
    println!("config hash {}", config.hash());
    let data = generate(&config)?;
    for part in ["val", "test"] {
        let b = data.partition(part).expect("partition");
        let positives = b.classification.iter().filter(|c| c.score > 0.5).count();
        println!(
            "{part}: {} images, {} objects, {} detections, {} classifier scores above 0.5",
            b.images.len(),
            b.ground_truth.len(),
            b.detections.len(),
            positives
        );
    }
    let written = data.write_to_dir(&out_dir)?;
    println!("wrote {} files under {out_dir}", written.len());
    Ok(())
}
