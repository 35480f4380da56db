use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::schema::LabelSchema;
use crate::volume::{Geometry, LabelVolume, Volume};

/// One-hot features of shape `(1, |schema| + 1, nz, ny, nx)`; channel 0 is
/// background.
pub fn one_hot_encode<T: Float>(labels: &LabelVolume) -> FeatureGrid<T> {
    let [nz, ny, nx] = labels.dims();
    let channels = labels.schema().num_channels();
    let mut grid = FeatureGrid::zeros([1, channels, nz, ny, nx]);
    let v = nz * ny * nx;
    let out = grid.data_mut();
    for (i, &l) in labels.data().iter().enumerate() {
        out[l as usize * v + i] = T::one();
    }
    grid
}

/// Per-voxel argmax over channels of batch item `b`; ties go to the lowest
/// channel.
pub fn argmax_channels<T: Float>(logits: &FeatureGrid<T>, b: usize) -> Vec<u8> {
    let v = logits.voxels();
    let item = logits.item(b);
    let mut best: Vec<T> = item[..v].to_vec();
    let mut arg = vec![0u8; v];
    for c in 1..logits.channels() {
        let chan = &item[c * v..(c + 1) * v];
        for i in 0..v {
            if chan[i] > best[i] {
                best[i] = chan[i];
                arg[i] = c as u8;
            }
        }
    }
    arg
}

/// Decodes batch item 0 into a label map. The channel count must equal the
/// schema's background-plus-labels count.
pub fn argmax_decode<T: Float>(
    logits: &FeatureGrid<T>,
    geometry: &Geometry,
    schema: LabelSchema,
) -> Result<LabelVolume> {
    if logits.channels() != schema.num_channels() {
        return Err(Error::InvalidArgument(format!(
            "{} channels cannot decode to {schema} ({} expected)",
            logits.channels(),
            schema.num_channels()
        )));
    }
    if logits.spatial() != geometry.dims {
        return Err(Error::GeometryMismatch(format!(
            "logits {:?} vs grid {:?}",
            logits.spatial(),
            geometry.dims
        )));
    }
    LabelVolume::new(geometry.clone(), schema, argmax_channels(logits, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_encodes_to_channel_zero() {
        let g = Geometry::isotropic([2, 2, 2], 1.0).unwrap();
        let lab = LabelVolume::background(g, LabelSchema::Six);
        let grid: FeatureGrid<f32> = one_hot_encode(&lab);
        assert_eq!(grid.shape(), [1, 7, 2, 2, 2]);
        assert!(grid.channel(0, 0).iter().all(|&v| v == 1.0));
        assert!(grid.data()[8..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_logits_pick_background() {
        let g = Geometry::isotropic([2, 2, 2], 1.0).unwrap();
        let grid = FeatureGrid::<f64>::zeros([1, 7, 2, 2, 2]);
        let lab = argmax_decode(&grid, &g, LabelSchema::Six).unwrap();
        assert_eq!(lab.foreground_count(), 0);
    }

    #[test]
    fn channel_count_checked() {
        let g = Geometry::isotropic([1, 1, 1], 1.0).unwrap();
        let grid = FeatureGrid::<f64>::zeros([1, 5, 1, 1, 1]);
        assert!(argmax_decode(&grid, &g, LabelSchema::Six).is_err());
    }
}
