//! Volumetric building blocks for whole-heart CT segmentation refinement.
//!
//! * [`volume`], [`io`], [`preprocess`]: grids, NIfTI/raw files, isotropic
//!   resampling, centring and field-of-view fitting.
//! * [`labels`]: the deterministic label-map algorithms.
//! * [`metrics`]: Dice scoring and report aggregation.
//! * [`phantom`]: synthetic hearts with known ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod io;
pub mod labels;
pub mod metrics;
pub mod phantom;
pub mod preprocess;
pub mod schema;
pub mod volume;

pub use error::{Error, Result};
pub use grid::FeatureGrid;
pub use schema::{LabelSchema, Structure, SINGLE_OBJECT};
pub use volume::{Geometry, IntensityVolume, LabelVolume, Volume};
