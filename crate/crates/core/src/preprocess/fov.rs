use crate::error::{Error, Result};
use crate::volume::{Geometry, IntensityVolume, LabelVolume, Volume};

use super::resample::resample_isotropic;

/// Centre of the bounding box of all non-background voxels, rounded to the
/// nearest voxel (halves round up).
pub fn heart_center(labels: &LabelVolume) -> Result<[usize; 3]> {
    let (lo, hi) = labels.foreground_bounds().ok_or(Error::EmptyLabels)?;
    Ok(std::array::from_fn(|a| (lo[a] + hi[a]).div_ceil(2)))
}

/// Crops and/or pads `vol` to `target_dims` so that input voxel `center`
/// lands on output voxel `target_dims / 2` (floored).
///
/// Voxels outside the source get `fill`, or the kind's default (background
/// for labels, the input minimum for intensities). The origin is shifted so
/// retained voxels keep their physical coordinates.
pub fn crop_or_pad<V: Volume>(
    vol: &V,
    target_dims: [usize; 3],
    center: [usize; 3],
    fill: Option<V::Voxel>,
) -> Result<V> {
    if target_dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "target dims {target_dims:?} must be positive"
        )));
    }
    let g = vol.geometry();
    let fill = fill.unwrap_or_else(|| vol.default_fill());
    let shift: [isize; 3] =
        std::array::from_fn(|a| center[a] as isize - (target_dims[a] / 2) as isize);
    let origin: [f64; 3] = std::array::from_fn(|a| g.origin[a] + shift[a] as f64 * g.spacing[a]);
    let out_geom = Geometry::new(target_dims, g.spacing, origin)?;

    let src = vol.data();
    let mut data = vec![fill; out_geom.len()];
    let in_range = |v: isize, a: usize| v >= 0 && (v as usize) < g.dims[a];
    for z in 0..target_dims[0] {
        let sz = z as isize + shift[0];
        if !in_range(sz, 0) {
            continue;
        }
        for y in 0..target_dims[1] {
            let sy = y as isize + shift[1];
            if !in_range(sy, 1) {
                continue;
            }
            let x0 = (-shift[2]).max(0) as usize;
            let x1 = ((g.dims[2] as isize - shift[2]).min(target_dims[2] as isize)).max(0) as usize;
            if x0 >= x1 {
                continue;
            }
            let dst = out_geom.index(z, y, x0);
            let s = g.index(sz as usize, sy as usize, (x0 as isize + shift[2]) as usize);
            data[dst..dst + (x1 - x0)].copy_from_slice(&src[s..s + (x1 - x0)]);
        }
    }
    Ok(vol.rebuild(out_geom, data))
}

#[derive(Clone, Debug)]
pub struct FovOptions {
    /// Spacing multiplier per iteration.
    pub growth: f64,
    pub max_iterations: usize,
    /// Intensity pad value; `None` pads with the input minimum.
    pub intensity_fill: Option<f32>,
}

impl Default for FovOptions {
    fn default() -> Self {
        FovOptions {
            growth: 1.1,
            max_iterations: 20,
            intensity_fill: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FovFit {
    pub intensity: IntensityVolume,
    pub labels: LabelVolume,
    pub spacing: f64,
    /// Number of spacing increases applied.
    pub iterations: usize,
}

fn fits(labels: &LabelVolume, target: [usize; 3]) -> Result<bool> {
    let (lo, hi) = labels.foreground_bounds().ok_or(Error::EmptyLabels)?;
    Ok((0..3).all(|a| hi[a] - lo[a] < target[a]))
}

/// Brings a paired image/label volume onto `target_dims`, coarsening the
/// spacing by `growth` per iteration until every labelled voxel fits.
///
/// Both inputs must share an isotropic grid. Each attempt resamples from
/// the original inputs, so the returned spacing is `s0 * growth^k` for the
/// smallest sufficient `k`.
pub fn fit_field_of_view(
    intensity: &IntensityVolume,
    labels: &LabelVolume,
    target_dims: [usize; 3],
    options: &FovOptions,
) -> Result<FovFit> {
    intensity.geometry().ensure_matches(labels.geometry())?;
    if !labels.geometry().is_isotropic() {
        return Err(Error::InvalidArgument(
            "field-of-view fitting needs an isotropic grid".into(),
        ));
    }
    let base = labels.geometry().spacing[0];
    for k in 0..=options.max_iterations {
        let spacing = base * options.growth.powi(k as i32);
        let (img, lab) = if k == 0 {
            (intensity.clone(), labels.clone())
        } else {
            (
                resample_isotropic(intensity, spacing)?,
                resample_isotropic(labels, spacing)?,
            )
        };
        if !fits(&lab, target_dims)? {
            continue;
        }
        let center = heart_center(&lab)?;
        let fill = options.intensity_fill.unwrap_or_else(|| img.min_value());
        let img = crop_or_pad(&img, target_dims, center, Some(fill))?;
        let cropped = crop_or_pad(&lab, target_dims, center, None)?;
        debug_assert_eq!(cropped.foreground_count(), lab.foreground_count());
        return Ok(FovFit {
            intensity: img,
            labels: cropped,
            spacing,
            iterations: k,
        });
    }
    Err(Error::FovIterationCap(options.max_iterations))
}
