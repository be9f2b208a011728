//! Drives simulate, build-prior, fuse and eval through the command-line
//! entry point, leaving manifests next to every output.
//!
//! ```text
//! cargo run --release --example cli_pipeline -- [WORK_DIR]
//! ```

use std::path::Path;

use dbf::synth::SyntheticConfig;

fn dbf(args: &[&str]) {
    println!("$ dbf {}", args.join(" "));
    let code = dbf::cli::run(std::iter::once("dbf").chain(args.iter().copied()));
    assert_eq!(code, dbf::cli::EXIT_OK, "command failed");
}

fn main() {
    let work = std::env::args().nth(1).unwrap_or_else(|| "target/example-pipeline".into());
    let work = Path::new(&work);
    std::fs::create_dir_all(work).expect("create work dir");
    let config = work.join("config.json");
    let text = serde_json::to_string_pretty(&SyntheticConfig::fusion_benchmark(0)).unwrap();
    std::fs::write(&config, text).expect("write config");

    let s = |p: &str| work.join(p).display().to_string();
    let (sim, priors) = (s("sim"), s("priors"));
    dbf(&["simulate", "--config", &s("config.json"), "--seed", "7", "--out-dir", &sim]);
    let split = |part: &str, file: &str| format!("{sim}/{part}/{file}");
    dbf(&[
        "build-prior",
        "--detections", &split("val", "detections_detector.jsonl"),
        "--classification", &split("val", "classification_classifier.jsonl"),
        "--groundtruth", &split("val", "groundtruth.jsonl"),
        "--image-list", &split("val", "images.txt"),
        "--out", &priors,
    ]);
    dbf(&[
        "fuse",
        "--detections", &split("test", "detections_detector.jsonl"),
        "--classification", &split("test", "classification_classifier.jsonl"),
        "--image-list", &split("test", "images.txt"),
        "--priors", &priors,
        "--out", &s("fused.jsonl"),
    ]);
    for (dets, report) in [(split("test", "detections_detector.jsonl"), s("raw.json")), (s("fused.jsonl"), s("fused.json"))] {
        dbf(&[
            "eval",
            "--detections", &dets,
            "--groundtruth", &split("test", "groundtruth.jsonl"),
            "--image-list", &split("test", "images.txt"),
            "--report", &report,
        ]);
    }
}
