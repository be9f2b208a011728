//! Dynamic belief fusion (DBF) of object-detector outputs with
//! image-classification priors.
//!
//! The pipeline is file-mediated and has four stages:
//!
//! 1. [`synth`] generates deterministic benchmark datasets (or bring your own
//!    detector dumps through [`io`]).
//! 2. [`prior`] turns a validation split into per-class, per-source
//!    precision-recall models. Classifier scores are broadcast onto detector
//!    boxes so that a classifier can be modeled like a detector.
//! 3. [`fusion`] maps each raw score to a mass function over
//!    `{T, NT, T or NT}`, clusters boxes across detectors and combines the
//!    evidence with Dempster's rule. The fused score is `m(T) - m(NT)`.
//! 4. [`eval`] scores any detection set with VOC-style AP/mAP.
//!
//! ```
//! use dbf::fusion::{dempster_combine, MassFunction};
//!
//! let detector = MassFunction::new(0.8, 0.09, 0.11).unwrap();
//! let classifier = MassFunction::new(0.1, 0.6, 0.3).unwrap();
//! let fused = dempster_combine(&detector, &classifier).unwrap();
//! assert!((fused.t - 0.6477).abs() < 1e-4);
//! ```

pub mod cli;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod prior;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{iou, BoundingBox, ClassificationScore, Detection, GroundTruthObject};
