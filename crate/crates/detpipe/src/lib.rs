//! # detpipe
//!
//! A toolkit for the non-neural parts of a video object-detection pipeline,
//! built around the line-oriented annotation format used by traffic-camera
//! helmet-violation challenges:
//!
//! - [`annotations`] — parse, validate, serialize, and reconcile ground-truth
//!   and detection records;
//! - [`metrics`] — IoU matching, per-class average precision, mAP@0.5 and
//!   mAP@0.5:0.95, confidence-swept precision/recall/F1 curves, and confusion
//!   matrices;
//! - [`sampling`] — deterministic, seeded planning of frame selection,
//!   background discard, near-duplicate removal, train/val splits, and
//!   class-balance over/under-sampling with box augmentation geometry;
//! - [`ga`] — a mutation-only genetic algorithm over a bounded hyperparameter
//!   space driven by a black-box evaluator;
//! - [`fusion`] — multi-model and test-time-augmentation detection merging
//!   via NMS or weighted box fusion;
//! - [`cli`] — the `detpipe` command-line entry points wiring it all together.
//!
//! Every operation is a pure function of its inputs; anything randomized
//! takes an explicit seed and is reproducible bit-for-bit. See the crate
//! `examples/` directory for one runnable example per major capability.

pub mod annotations;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod ga;
pub mod metrics;
pub mod sampling;

pub use annotations::{
    BoundingBox, ClassHistogram, ClassId, DetectionRecord, FrameGeometry, GroundTruthRecord,
};
pub use error::{Error, Result};
