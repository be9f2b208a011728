use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dbf::io;
use dbf::synth::{generate, SourceProfile, SyntheticConfig};
use dbf::{BoundingBox, Detection, GroundTruthObject};

fn dbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbf")).args(args).output().expect("run dbf")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(seed: u64) -> SyntheticConfig {
    let mut config = SyntheticConfig::fusion_benchmark(seed);
    config.n_images = 200;
    config.partitions = None;
    config
}

struct Split {
    dir: PathBuf,
}

impl Split {
    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn inputs(&self) -> Vec<String> {
        [
            "--detections",
            p(&self.file("detections_detector.jsonl")),
            "--classification",
            p(&self.file("classification_classifier.jsonl")),
            "--image-list",
            p(&self.file("images.txt")),
        ]
        .map(String::from)
        .to_vec()
    }
}

fn write_synthetic(config: &SyntheticConfig, dir: &Path) -> (Split, Split) {
    generate(config).unwrap().write_to_dir(dir).unwrap();
    (Split { dir: dir.join("val") }, Split { dir: dir.join("test") })
}

fn build_prior(split: &Split, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec!["build-prior".into()];
    args.extend(split.inputs());
    args.extend(["--groundtruth".into(), p(&split.file("groundtruth.jsonl")).into(), "--out".into(), p(out).into()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    dbf(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn fuse(split: &Split, priors: &Path, out: &Path) -> Output {
    let mut args: Vec<String> = vec!["fuse".into()];
    args.extend(split.inputs());
    args.extend(["--priors".into(), p(priors).into(), "--out".into(), p(out).into()]);
    dbf(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn eval_map(dets: &Path, gt: &Path, report: &Path, images: &Path) -> (Output, f64) {
    let out = dbf(&["eval", "--detections", p(dets), "--groundtruth", p(gt), "--report", p(report), "--image-list", p(images)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let map = report["map"].as_f64().unwrap();
    (out, map)
}

#[test]
fn build_prior_writes_one_model_per_class_and_source() {
    let tmp = tempfile::tempdir().unwrap();
    let (val, _) = write_synthetic(&small_config(1), tmp.path());
    let out = tmp.path().join("priors");
    let res = build_prior(&val, &out, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let models = io::read_prior_dir(&out).unwrap();
    assert_eq!(models.len(), 6);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn fixed_exponent_is_written_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let (val, _) = write_synthetic(&small_config(2), tmp.path());
    let out = tmp.path().join("priors");
    assert_eq!(build_prior(&val, &out, &["--n", "4"]).status.code(), Some(0));
    let models = io::read_prior_dir(&out).unwrap();
    assert!(!models.is_empty());
    assert!(models.iter().all(|m| m.n() == 4));
}

#[test]
fn auto_exponent_matches_inequality_check() {
    // 90 positives; 18 TP + 2 FP at 0.9 and 27 TP + 28 FP at 0.5 give
    // samples (0.9, 0.2) and (0.6, 0.5)
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    let gt_box = BoundingBox::new(10.0, 10.0, 50.0, 50.0).unwrap();
    let fp_box = BoundingBox::new(100.0, 100.0, 140.0, 140.0).unwrap();
    for i in 0..90 {
        let image = format!("img{i:03}");
        gts.push(GroundTruthObject::new(&image, "car", gt_box, false).unwrap());
        let score = match i {
            0..18 => Some(0.9),
            18..45 => Some(0.5),
            _ => None,
        };
        if let Some(s) = score {
            dets.push(Detection::new(&image, "car", gt_box, s, "det").unwrap());
        }
        if i < 2 {
            dets.push(Detection::new(&image, "car", fp_box, 0.9, "det").unwrap());
        } else if i < 30 {
            dets.push(Detection::new(&image, "car", fp_box, 0.5, "det").unwrap());
        }
    }
    io::write_ground_truth(dir.join("gt.jsonl"), &gts).unwrap();
    io::write_detections(dir.join("det.jsonl"), &dets).unwrap();
    let out = dir.join("priors");
    let res = dbf(&[
        "build-prior",
        "--detections",
        p(&dir.join("det.jsonl")),
        "--groundtruth",
        p(&dir.join("gt.jsonl")),
        "--n",
        "auto",
        "--out",
        p(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let models = io::read_prior_dir(&out).unwrap();
    assert_eq!(models.len(), 1);
    let m = &models[0];
    assert_eq!((m.class_id(), m.source_id()), ("car", "det"));
    let pr: Vec<(f64, f64)> = m.samples().iter().map(|s| (s.precision, s.recall)).collect();
    assert_eq!(pr, vec![(0.9, 0.2), (0.6, 0.5)]);
    assert_eq!(m.n(), 2);
}

#[test]
fn missing_ground_truth_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (val, _) = write_synthetic(&small_config(3), tmp.path());
    let mut args: Vec<String> = vec!["build-prior".into()];
    args.extend(val.inputs());
    args.extend(["--groundtruth", "/nonexistent/gt.jsonl", "--out", p(&tmp.path().join("o"))].map(String::from));
    let res = dbf(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn fuse_is_deterministic_and_names_missing_priors() {
    let tmp = tempfile::tempdir().unwrap();
    let (val, test) = write_synthetic(&small_config(4), tmp.path());
    let priors = tmp.path().join("priors");
    assert_eq!(build_prior(&val, &priors, &[]).status.code(), Some(0));

    let a = tmp.path().join("a.jsonl");
    let b = tmp.path().join("b.jsonl");
    assert_eq!(fuse(&test, &priors, &a).status.code(), Some(0));
    assert_eq!(fuse(&test, &priors, &b).status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(tmp.path().join("a.jsonl.manifest.json").exists());

    std::fs::remove_file(priors.join(io::prior_file_name("dog", "classifier"))).unwrap();
    let res = fuse(&test, &priors, &tmp.path().join("c.jsonl"));
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("dog") && stderr.contains("classifier"), "{stderr}");
}

#[test]
fn fused_output_beats_raw_detector_in_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = SyntheticConfig::fusion_benchmark(5);
    config.n_images = 600;
    config.partitions = None;
    let (val, test) = write_synthetic(&config, tmp.path());
    let priors = tmp.path().join("priors");
    assert_eq!(build_prior(&val, &priors, &[]).status.code(), Some(0));
    let fused = tmp.path().join("fused.jsonl");
    assert_eq!(fuse(&test, &priors, &fused).status.code(), Some(0));
    let gt = test.file("groundtruth.jsonl");
    let images = test.file("images.txt");
    let (_, raw) = eval_map(&test.file("detections_detector.jsonl"), &gt, &tmp.path().join("raw.json"), &images);
    let (_, fused) = eval_map(&fused, &gt, &tmp.path().join("fused.json"), &images);
    assert!(fused > raw, "fused {fused} <= raw {raw}");
}

#[test]
fn perfect_detector_prints_map_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_config(6);
    config.detectors = vec![SourceProfile {
        tp_recall: 1.0,
        fp_rate: 0.0,
        localization_jitter: 0.0,
        ..SourceProfile::fp_heavy("detector", 0.0)
    }];
    let (_, test) = write_synthetic(&config, tmp.path());
    let (out, map) = eval_map(
        &test.file("detections_detector.jsonl"),
        &test.file("groundtruth.jsonl"),
        &tmp.path().join("report.json"),
        &test.file("images.txt"),
    );
    assert_eq!(map, 1.0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().last().unwrap().contains("1.0000"), "{stdout}");
}

#[test]
fn bad_ap_method_is_a_usage_error() {
    let res = dbf(&["eval", "--detections", "d.jsonl", "--groundtruth", "g.jsonl", "--ap", "voc12", "--report", "r.json"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn simulate_writes_partitions_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(0);
    let config_path = tmp.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = tmp.path().join("sim");
    let res = dbf(&["simulate", "--config", p(&config_path), "--seed", "9", "--out-dir", p(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for part in ["train", "val", "test"] {
        for f in ["images.txt", "groundtruth.jsonl", "detections_detector.jsonl", "classification_classifier.jsonl"] {
            assert!(out.join(part).join(f).exists(), "{part}/{f}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["options"]["config"]["seed"], 9);
    assert_eq!(manifest["options"]["config"]["n_images"], 200);
}
