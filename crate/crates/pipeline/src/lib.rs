//! The multi-stage refinement flow.
//!
//! Ground truth for every stage comes from one SIX map plus annotations
//! ([`truth`]). Each stage network is trained on pairs built in
//! [`training`]; [`inference`] chains the networks, fuses their outputs
//! into a TEN map and cleans it up. [`manifest`] drives batches from JSON.

pub mod dataset;
pub mod error;
pub mod inference;
pub mod manifest;
pub mod prep;
pub mod stage;
pub mod training;
pub mod truth;

pub use dataset::{Case, PreparedCase, Split};
pub use error::{Error, Result};
pub use inference::{plan, run_inference, InferenceResult, ModelSet};
pub use manifest::{run_pipeline, CaseOrigin, CaseRecord, PipelineManifest, Provenance};
pub use prep::GridConfig;
pub use stage::{Stage, StageSpec, LA_PARTS};
pub use training::{train_stage, StageOutcome, StageTrainingConfig};
pub use truth::{build_ground_truth, simulate_fov_crop, GroundTruth};
