//! Geometric normalisation: isotropic resampling, heart centring,
//! crop/pad and field-of-view fitting.

mod fov;
mod resample;

pub use fov::{crop_or_pad, fit_field_of_view, heart_center, FovFit, FovOptions};
pub use resample::{resample_isotropic, Resample, NEAREST_TIE_EPS};
