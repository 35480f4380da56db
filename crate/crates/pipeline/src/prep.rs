//! Working-grid preparation and network input encoding.

use cardiorefine_core::labels::one_hot_encode;
use cardiorefine_core::preprocess::{crop_or_pad, fit_field_of_view, heart_center, resample_isotropic, FovOptions, Resample};
use cardiorefine_core::{FeatureGrid, IntensityVolume, LabelSchema, LabelVolume, Structure, Volume};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stage::Window;

/// Working grid: isotropic spacing plus the two network windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub spacing: f64,
    pub heart_dims: [usize; 3],
    pub atrium_dims: [usize; 3],
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { spacing: 1.0, heart_dims: [128, 192, 192], atrium_dims: [128, 128, 128] }
    }
}

impl GridConfig {
    /// The standard phantom grid: 4 mm voxels, windows scaled by a quarter.
    pub fn desk() -> Self {
        GridConfig { spacing: 4.0, heart_dims: [32, 48, 48], atrium_dims: [32, 32, 32] }
    }

    pub fn dims(&self, window: Window) -> [usize; 3] {
        match window {
            Window::Heart => self.heart_dims,
            Window::Atrium => self.atrium_dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!("spacing {} must be positive", self.spacing)));
        }
        for d in [self.heart_dims, self.atrium_dims] {
            if d.iter().any(|&v| v == 0 || v % 8 != 0) {
                return Err(Error::InvalidArgument(format!("window {d:?} must be positive multiples of 8")));
            }
        }
        Ok(())
    }
}

/// Resampling and cropping applied to bring a case onto the heart window.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTransform {
    pub spacing: f64,
    pub center: [usize; 3],
    pub dims: [usize; 3],
    pub iterations: usize,
}

impl GridTransform {
    /// Intensities outside the source are padded with its minimum.
    pub fn apply<V: Resample>(&self, vol: &V) -> Result<V> {
        let r = resample_isotropic(vol, self.spacing)?;
        Ok(crop_or_pad(&r, self.dims, self.center, None)?)
    }
}

/// Finds the transform that fits the labelled heart into the window,
/// coarsening the spacing if needed.
pub fn fit_transform(intensity: &IntensityVolume, reference: &LabelVolume, grid: &GridConfig) -> Result<GridTransform> {
    let img = resample_isotropic(intensity, grid.spacing)?;
    let lab = resample_isotropic(reference, grid.spacing)?;
    let fit = fit_field_of_view(&img, &lab, grid.heart_dims, &FovOptions::default())?;
    let lab = resample_isotropic(reference, fit.spacing)?;
    Ok(GridTransform { spacing: fit.spacing, center: heart_center(&lab)?, dims: grid.heart_dims, iterations: fit.iterations })
}

/// Without labels the window is centred on the volume.
pub fn centered_transform(intensity: &IntensityVolume, grid: &GridConfig) -> Result<GridTransform> {
    let img = resample_isotropic(intensity, grid.spacing)?;
    let center = img.dims().map(|d| d / 2);
    Ok(GridTransform { spacing: grid.spacing, center, dims: grid.heart_dims, iterations: 0 })
}

/// Standardised intensity as a one-channel grid.
pub fn image_input(intensity: &IntensityVolume) -> FeatureGrid<f32> {
    let [z, y, x] = intensity.dims();
    let data = intensity.standardized().into_iter().map(|v| v as f32).collect();
    FeatureGrid::from_vec([1, 1, z, y, x], data).expect("dims are positive")
}

/// One-hot channels of `labels`, optionally followed by the standardised
/// intensity.
pub fn label_input(labels: &LabelVolume, intensity: Option<&IntensityVolume>) -> Result<FeatureGrid<f32>> {
    let hot: FeatureGrid<f32> = one_hot_encode(labels);
    let Some(img) = intensity else {
        return Ok(hot);
    };
    img.geometry().ensure_matches(labels.geometry())?;
    let [b, c, z, y, x] = hot.shape();
    let mut data = hot.into_vec();
    data.extend(image_input(img).into_vec());
    Ok(FeatureGrid::from_vec([b, c + 1, z, y, x], data)?)
}

/// The atrium window: a fixed-size crop centred on the LA bounding box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtriumWindow {
    pub center: [usize; 3],
    pub dims: [usize; 3],
}

impl AtriumWindow {
    /// `None` when the map has no LA voxels.
    pub fn locate(labels: &LabelVolume, dims: [usize; 3]) -> Result<Option<Self>> {
        let la = labels.schema().require(Structure::LA)?;
        Ok(labels
            .bounding_box_where(|v| v == la)
            .map(|(lo, hi)| AtriumWindow { center: std::array::from_fn(|a| (lo[a] + hi[a]).div_ceil(2)), dims }))
    }

    pub fn crop<V: Volume>(&self, vol: &V) -> Result<V> {
        Ok(crop_or_pad(vol, self.dims, self.center, None)?)
    }

    /// Maps a window voxel back to the full grid, if it lies inside `full`.
    pub fn to_full(&self, [z, y, x]: [usize; 3], full: [usize; 3]) -> Option<[usize; 3]> {
        let p = [z, y, x];
        let mut out = [0; 3];
        for a in 0..3 {
            let v = p[a] as isize + self.center[a] as isize - (self.dims[a] / 2) as isize;
            if v < 0 || v as usize >= full[a] {
                return None;
            }
            out[a] = v as usize;
        }
        Some(out)
    }
}

/// Background/LA indicator channels of a cropped map.
pub fn la_mask_input(window: &LabelVolume) -> Result<FeatureGrid<f32>> {
    let la = window.schema().require(Structure::LA)?;
    let [z, y, x] = window.dims();
    let v = z * y * x;
    let mut data = vec![0.0f32; 2 * v];
    for (i, &l) in window.data().iter().enumerate() {
        data[if l == la { v + i } else { i }] = 1.0;
    }
    Ok(FeatureGrid::from_vec([1, 2, z, y, x], data)?)
}

/// Re-labels a SEVEN map as SIX_NO_PA_REFINED by clearing the PA.
pub fn drop_pa(seven: &LabelVolume) -> Result<LabelVolume> {
    seven.ensure_schema(LabelSchema::Seven)?;
    let pa = LabelSchema::Seven.require(Structure::PA)?;
    let data = seven.data().iter().map(|&v| if v == pa { 0 } else { v }).collect();
    Ok(LabelVolume::new(seven.geometry().clone(), LabelSchema::SixNoPaRefined, data)?)
}
