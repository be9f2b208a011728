//! The `dbf` command line: `simulate`, `build-prior`, `fuse` and `eval`.
//!
//! Exit codes are 0 on success, 1 on usage errors and 2 on data or
//! configuration errors. Every run writes one JSON manifest next to its
//! outputs recording the resolved options, inputs, outputs, tool version
//! and a hash of the options.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{evaluate, ApMethod};
use crate::fusion::{fuse_dataset, PriorSet, DEFAULT_CLUSTER_IOU};
use crate::geometry::{ClassificationScore, Detection};
use crate::io;
use crate::prior::{build_priors, prior_keys, Exponent, PriorOptions, DEFAULT_IOU_THRESHOLD, DEFAULT_N_MAX};
use crate::synth::{self, hex_digest, SyntheticConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dbf", version, about = "Dynamic belief fusion of detections with classification priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Detector input as `[SOURCE=]PATH`. Without a source, the file stem is
/// used with any `detections_` / `classification_` prefix removed.
#[derive(Debug, Clone)]
struct SourceFile {
    source_id: String,
    path: PathBuf,
}

impl std::str::FromStr for SourceFile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (source_id, path) = match s.split_once('=') {
            Some((source, path)) => (source.to_string(), PathBuf::from(path)),
            None => {
                let path = PathBuf::from(s);
                let stem = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.split('.').next().unwrap_or(n))
                    .ok_or_else(|| format!("cannot derive a source id from `{s}`"))?;
                let stem = stem
                    .strip_prefix("detections_")
                    .or_else(|| stem.strip_prefix("classification_"))
                    .unwrap_or(stem);
                (stem.to_string(), path)
            }
        };
        if source_id.is_empty() || path.as_os_str().is_empty() {
            return Err(format!("expected [SOURCE=]PATH, got `{s}`"));
        }
        Ok(SourceFile { source_id, path })
    }
}

/// VOC results file as `SOURCE:CLASS=PATH`.
#[derive(Debug, Clone)]
struct VocFile {
    source_id: String,
    class_id: String,
    path: PathBuf,
}

impl std::str::FromStr for VocFile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parsed = s.split_once('=').and_then(|(key, path)| {
            let (source, class) = key.split_once(':')?;
            (!source.is_empty() && !class.is_empty() && !path.is_empty()).then(|| VocFile {
                source_id: source.to_string(),
                class_id: class.to_string(),
                path: PathBuf::from(path),
            })
        });
        parsed.ok_or_else(|| format!("expected SOURCE:CLASS=PATH, got `{s}`"))
    }
}

#[derive(Debug, clap::Args)]
struct DetectorInputs {
    /// Detections JSONL, `[SOURCE=]PATH` (repeatable).
    #[arg(long = "detections", value_name = "[SOURCE=]PATH")]
    detections: Vec<SourceFile>,
    /// VOC results text, `SOURCE:CLASS=PATH` (repeatable).
    #[arg(long = "voc-detections", value_name = "SOURCE:CLASS=PATH")]
    voc_detections: Vec<VocFile>,
    /// Classification scores JSONL, `[SOURCE=]PATH` (repeatable).
    #[arg(long = "classification", value_name = "[SOURCE=]PATH")]
    classification: Vec<SourceFile>,
    /// File declaring the image universe, one image id per line.
    #[arg(long)]
    image_list: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark split into named partitions.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build prior performance models from a validation split.
    BuildPrior {
        #[command(flatten)]
        inputs: DetectorInputs,
        #[arg(long)]
        groundtruth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        /// Ambiguity exponent: `auto` or a fixed integer >= 1.
        #[arg(long, default_value = "auto")]
        n: Exponent,
        /// Upper bound for the automatic exponent fit.
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: u32,
        #[arg(long, default_value_t = DEFAULT_CLUSTER_IOU)]
        cluster_iou: f64,
        /// Output directory for `<class>__<source>.prior.json` files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse detections and classification scores using prior models.
    Fuse {
        #[command(flatten)]
        inputs: DetectorInputs,
        /// Directory of prior model files.
        #[arg(long)]
        priors: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLUSTER_IOU)]
        cluster_iou: f64,
        /// Fused detections JSONL.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate detections against ground truth (per-class AP and mAP).
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        groundtruth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        /// `continuous` or `voc07`.
        #[arg(long, default_value = "continuous")]
        ap: ApMethod,
        /// JSON report path.
        #[arg(long)]
        report: PathBuf,
        /// Optional directory for per-class PR CSVs.
        #[arg(long)]
        pr_dir: Option<PathBuf>,
        #[arg(long)]
        image_list: Option<PathBuf>,
    },
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, seed, out_dir } => simulate(&config, seed, &out_dir),
        Command::BuildPrior {
            inputs,
            groundtruth,
            iou,
            n,
            n_max,
            cluster_iou,
            out,
        } => {
            let exponent = match n {
                Exponent::Auto { .. } => Exponent::Auto { n_max },
                fixed => fixed,
            };
            build_prior(&inputs, &groundtruth, PriorOptions { iou_threshold: iou, exponent, cluster_iou }, &out)
        }
        Command::Fuse {
            inputs,
            priors,
            cluster_iou,
            out,
        } => fuse(&inputs, &priors, cluster_iou, &out),
        Command::Eval {
            detections,
            groundtruth,
            iou,
            ap,
            report,
            pr_dir,
            image_list,
        } => eval(&detections, &groundtruth, iou, ap, &report, pr_dir.as_deref(), image_list.as_deref()),
    }
}

fn simulate(config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let mut config: SyntheticConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: config_path.to_path_buf(),
        source,
    })?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let data = synth::generate(&config)?;
    let outputs = data.write_to_dir(out_dir)?;
    for p in &data.partitions {
        println!(
            "{}: {} images, {} objects, {} detections",
            p.name,
            p.bundle.images.len(),
            p.bundle.ground_truth.len(),
            p.bundle.detections.len()
        );
    }
    let manifest = Manifest {
        command: "simulate",
        options: json!({ "config": config, "seed": config.seed, "out_dir": out_dir }),
        inputs: vec![config_path.to_path_buf()],
        outputs,
        config_hash: config.hash(),
    };
    manifest.write(&out_dir.join("manifest.json"))
}

struct LoadedInputs {
    detections: Vec<Detection>,
    classification: Vec<ClassificationScore>,
    image_list: Option<Vec<String>>,
    paths: Vec<PathBuf>,
}

fn load_inputs(inputs: &DetectorInputs) -> Result<LoadedInputs> {
    if inputs.detections.is_empty() && inputs.voc_detections.is_empty() {
        return Err(Error::Config("at least one --detections or --voc-detections input is required".into()));
    }
    let mut detections = Vec::new();
    let mut paths = Vec::new();
    for f in &inputs.detections {
        detections.extend(io::read_detections(&f.path, &f.source_id)?);
        paths.push(f.path.clone());
    }
    for f in &inputs.voc_detections {
        detections.extend(io::read_voc_detections(&f.path, &f.class_id, &f.source_id)?);
        paths.push(f.path.clone());
    }
    let mut classification = Vec::new();
    let mut seen = BTreeSet::new();
    for f in &inputs.classification {
        if !seen.insert(f.source_id.as_str()) {
            return Err(Error::Config(format!("classifier source `{}` given twice", f.source_id)));
        }
        classification.extend(io::read_classification(&f.path, &f.source_id)?);
        paths.push(f.path.clone());
    }
    let detector_sources: BTreeSet<&str> = detections.iter().map(|d| d.source_id.as_str()).collect();
    if let Some(clash) = seen.iter().find(|s| detector_sources.contains(*s)) {
        return Err(Error::Config(format!("source `{clash}` is both a detector and a classifier")));
    }
    let image_list = match &inputs.image_list {
        Some(p) => {
            paths.push(p.clone());
            Some(io::read_image_list(p)?)
        }
        None => None,
    };
    Ok(LoadedInputs {
        detections,
        classification,
        image_list,
        paths,
    })
}

fn source_json(files: &[SourceFile]) -> Value {
    files.iter().map(|f| json!({ "source_id": f.source_id, "path": f.path })).collect()
}

fn voc_json(files: &[VocFile]) -> Value {
    files
        .iter()
        .map(|f| json!({ "source_id": f.source_id, "class_id": f.class_id, "path": f.path }))
        .collect()
}

fn build_prior(inputs: &DetectorInputs, groundtruth: &Path, options: PriorOptions, out: &Path) -> Result<()> {
    let loaded = load_inputs(inputs)?;
    let ground_truth = io::read_ground_truth(groundtruth)?;
    let bundle = io::DatasetBundle {
        images: loaded.image_list.unwrap_or_default(),
        ground_truth,
        detections: loaded.detections,
        classification: loaded.classification,
    };
    bundle.validate()?;
    let models = build_priors(&bundle.ground_truth, &bundle.detections, &bundle.classification, &options)?;
    let outputs = io::write_prior_dir(out, &models)?;
    for m in &models {
        println!("{} / {}: {} samples, n = {}", m.class_id(), m.source_id(), m.samples().len(), m.n());
    }
    let exponent = match options.exponent {
        Exponent::Auto { n_max } => json!({ "auto": { "n_max": n_max } }),
        Exponent::Fixed(n) => json!({ "fixed": n }),
    };
    let mut input_paths = loaded.paths;
    input_paths.push(groundtruth.to_path_buf());
    Manifest::new(
        "build-prior",
        json!({
            "detections": source_json(&inputs.detections),
            "voc_detections": voc_json(&inputs.voc_detections),
            "classification": source_json(&inputs.classification),
            "groundtruth": groundtruth,
            "image_list": inputs.image_list,
            "iou": options.iou_threshold,
            "n": exponent,
            "cluster_iou": options.cluster_iou,
            "out": out,
        }),
        input_paths,
        outputs,
    )
    .write(&out.join("manifest.json"))
}

fn fuse(inputs: &DetectorInputs, priors_dir: &Path, cluster_iou: f64, out: &Path) -> Result<()> {
    let loaded = load_inputs(inputs)?;
    if let Some(images) = &loaded.image_list {
        let declared = images.iter().map(String::as_str).collect();
        io::check_image_universe(&declared, &loaded.detections, &loaded.classification)?;
    }
    let models = io::read_prior_dir(priors_dir)?;
    log::info!("loaded {} prior models {:?}", models.len(), prior_keys(&models));
    let priors = PriorSet::new(models);
    let fused = fuse_dataset(&loaded.detections, &loaded.classification, &priors, cluster_iou)?;
    io::write_fused(out, &fused)?;
    println!("fused {} detections into {} boxes", loaded.detections.len(), fused.len());
    let mut input_paths = loaded.paths;
    input_paths.push(priors_dir.to_path_buf());
    Manifest::new(
        "fuse",
        json!({
            "detections": source_json(&inputs.detections),
            "voc_detections": voc_json(&inputs.voc_detections),
            "classification": source_json(&inputs.classification),
            "image_list": inputs.image_list,
            "priors": priors_dir,
            "cluster_iou": cluster_iou,
            "out": out,
        }),
        input_paths,
        vec![out.to_path_buf()],
    )
    .write(&sidecar(out))
}

fn eval(
    detections: &Path,
    groundtruth: &Path,
    iou: f64,
    method: ApMethod,
    report_path: &Path,
    pr_dir: Option<&Path>,
    image_list: Option<&Path>,
) -> Result<()> {
    let dets = io::read_detections(detections, "eval")?;
    let gts = io::read_ground_truth(groundtruth)?;
    let mut inputs = vec![detections.to_path_buf(), groundtruth.to_path_buf()];
    if let Some(p) = image_list {
        let bundle = io::DatasetBundle {
            images: io::read_image_list(p)?,
            ground_truth: gts.clone(),
            detections: dets.clone(),
            classification: Vec::new(),
        };
        bundle.validate()?;
        inputs.push(p.to_path_buf());
    }
    let report = evaluate(&dets, &gts, iou, method)?;
    print!("{}", report.to_table());
    std::fs::write(report_path, report.to_json()).map_err(|e| Error::io(report_path, e))?;
    let mut outputs = vec![report_path.to_path_buf()];
    if let Some(dir) = pr_dir {
        report.write_pr_csvs(dir)?;
        outputs.push(dir.to_path_buf());
    }
    Manifest::new(
        "eval",
        json!({
            "detections": detections,
            "groundtruth": groundtruth,
            "iou": iou,
            "ap": method,
            "report": report_path,
            "pr_dir": pr_dir,
            "image_list": image_list,
        }),
        inputs,
        outputs,
    )
    .write(&sidecar(report_path))
}

/// `<path>.manifest.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

struct Manifest {
    command: &'static str,
    options: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config_hash: String,
}

impl Manifest {
    fn new(command: &'static str, options: Value, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        let config_hash = hex_digest(options.to_string().as_bytes());
        Self {
            command,
            options,
            inputs,
            outputs,
            config_hash,
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = json!({
            "command": self.command,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "options": self.options,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "config_hash": self.config_hash,
            "timestamp": timestamp,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        text.push('\n');
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
