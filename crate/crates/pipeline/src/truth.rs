//! Ground-truth derivation for every stage from one SIX map plus annotations.

use cardiorefine_core::labels::{lv_myo_reassign, parcellate_la_boxes, split_by_plane, Annotations};
use cardiorefine_core::{IntensityVolume, LabelSchema, LabelVolume, Structure, Volume};

use crate::error::{Error, Result};
use crate::prep::drop_pa;

/// Targets derived from one annotated case, all on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub six: LabelVolume,
    pub six_no_pa_refined: LabelVolume,
    pub seven: LabelVolume,
    pub ten: LabelVolume,
    /// Voxels moved from LV to LVMyo by the refinement.
    pub myo_transferred: usize,
}

/// Refines the myocardium, splits the PA off the RV at the valve plane and
/// parcellates the atrium.
///
/// `labels` may use any schema that merges into SIX. Without any RV voxels
/// the split is skipped and the SEVEN map simply has no PA.
pub fn build_ground_truth(
    intensity: &IntensityVolume,
    labels: &LabelVolume,
    annotations: &Annotations,
) -> Result<GroundTruth> {
    let six = labels.merge_into(LabelSchema::Six)?;
    let refined = lv_myo_reassign(intensity, &six)?;
    let rv = LabelSchema::Six.require(Structure::RV)?;
    let pa = LabelSchema::Seven.require(Structure::PA)?;
    let seven = if refined.labels.data().contains(&rv) {
        split_by_plane(&refined.labels, rv, &annotations.plane, rv, pa, LabelSchema::Seven)?
    } else {
        refined.labels.with_schema(LabelSchema::Seven)?
    };
    let ten = parcellate_la_boxes(&seven, &annotations.boxes)?;
    Ok(GroundTruth {
        six,
        six_no_pa_refined: drop_pa(&seven)?,
        seven,
        ten,
        myo_transferred: refined.transferred,
    })
}

/// Clears the top `floor(fraction * nz)` slices (highest z, superior) of
/// both volumes: intensities become the volume minimum, labels background.
pub fn simulate_fov_crop(
    intensity: &IntensityVolume,
    labels: &LabelVolume,
    fraction: f64,
) -> Result<(IntensityVolume, LabelVolume)> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("crop fraction {fraction} must lie in [0, 0.5)")));
    }
    intensity.geometry().ensure_matches(labels.geometry())?;
    Ok((crop_top(intensity, fraction), crop_top(labels, fraction)))
}

/// First z index that [`simulate_fov_crop`] clears.
pub fn crop_start(nz: usize, fraction: f64) -> usize {
    nz - (fraction * nz as f64).floor() as usize
}

pub(crate) fn crop_top<V: Volume>(vol: &V, fraction: f64) -> V {
    let [nz, ny, nx] = vol.dims();
    let fill = vol.default_fill();
    let mut data = vol.data().to_vec();
    data[crop_start(nz, fraction) * ny * nx..].fill(fill);
    vol.rebuild(vol.geometry().clone(), data)
}
