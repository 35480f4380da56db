use crate::error::{Error, Result};
use crate::volume::{Geometry, IntensityVolume, LabelVolume, Volume};

/// Added before flooring so that exact half-way positions round up even
/// when the spacing ratio is not representable.
pub const NEAREST_TIE_EPS: f64 = 1e-9;

/// Per-kind interpolation: trilinear for intensities, nearest neighbour
/// for labels.
pub trait Resample: Volume {
    /// Value at continuous voxel coordinates (clamped to the grid).
    fn sample(&self, pos: [f64; 3]) -> Self::Voxel;
}

#[inline]
fn nearest(pos: f64, n: usize) -> usize {
    let i = (pos + 0.5 + NEAREST_TIE_EPS).floor();
    i.clamp(0.0, (n - 1) as f64) as usize
}

impl Resample for LabelVolume {
    fn sample(&self, pos: [f64; 3]) -> u8 {
        let g = self.geometry();
        let [z, y, x] = std::array::from_fn(|a| nearest(pos[a], g.dims[a]));
        self.data()[g.index(z, y, x)]
    }
}

impl Resample for IntensityVolume {
    fn sample(&self, pos: [f64; 3]) -> f32 {
        let g = self.geometry();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let max = (g.dims[a] - 1) as f64;
            let p = pos[a].clamp(0.0, max);
            let f = p.floor();
            lo[a] = f as usize;
            hi[a] = (lo[a] + 1).min(g.dims[a] - 1);
            frac[a] = p - f;
        }
        let d = self.data();
        let v = |z: usize, y: usize, x: usize| d[g.index(z, y, x)] as f64;
        // a + (b - a) * t keeps constant neighbourhoods exact
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(v(lo[0], lo[1], lo[2]), v(lo[0], lo[1], hi[2]), frac[2]);
        let c01 = lerp(v(lo[0], hi[1], lo[2]), v(lo[0], hi[1], hi[2]), frac[2]);
        let c10 = lerp(v(hi[0], lo[1], lo[2]), v(hi[0], lo[1], hi[2]), frac[2]);
        let c11 = lerp(v(hi[0], hi[1], lo[2]), v(hi[0], hi[1], hi[2]), frac[2]);
        let c0 = lerp(c00, c01, frac[1]);
        let c1 = lerp(c10, c11, frac[1]);
        lerp(c0, c1, frac[0]) as f32
    }
}

/// Resamples onto an isotropic grid with `target_spacing`.
///
/// Output dims are `round(extent / target_spacing)` per axis. Output voxel
/// `j` samples the input at continuous index `(j + 0.5) * r - 0.5` with
/// `r = target / source spacing`, so the grid's outer corner is fixed and
/// the physical extent is preserved to within one voxel.
pub fn resample_isotropic<V: Resample>(vol: &V, target_spacing: f64) -> Result<V> {
    if !(target_spacing.is_finite() && target_spacing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target spacing must be positive, got {target_spacing}"
        )));
    }
    let g = vol.geometry();
    if g.dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "cannot resample an empty volume".into(),
        ));
    }
    if g.spacing.iter().all(|&s| s == target_spacing) {
        return Ok(vol.clone());
    }

    let extent = g.extent();
    let dims: [usize; 3] =
        std::array::from_fn(|a| ((extent[a] / target_spacing).round() as usize).max(1));
    let ratio: [f64; 3] = std::array::from_fn(|a| target_spacing / g.spacing[a]);
    let origin: [f64; 3] =
        std::array::from_fn(|a| g.origin[a] + (target_spacing - g.spacing[a]) / 2.0);
    let out_geom = Geometry::new(dims, [target_spacing; 3], origin)?;

    let src_pos = |j: usize, a: usize| (j as f64 + 0.5) * ratio[a] - 0.5;
    let mut data = Vec::with_capacity(out_geom.len());
    for z in 0..dims[0] {
        let pz = src_pos(z, 0);
        for y in 0..dims[1] {
            let py = src_pos(y, 1);
            for x in 0..dims[2] {
                data.push(vol.sample([pz, py, src_pos(x, 2)]));
            }
        }
    }
    Ok(vol.rebuild(out_geom, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::LabelSchema;

    #[test]
    fn factor_two_upsampling_dims() {
        let g = Geometry::isotropic([64, 96, 96], 2.0).unwrap();
        let v = LabelVolume::background(g, LabelSchema::Six);
        let out = resample_isotropic(&v, 1.0).unwrap();
        assert_eq!(out.dims(), [128, 192, 192]);
        assert_eq!(out.geometry().spacing, [1.0; 3]);
        assert_eq!(out.geometry().origin, [-0.5; 3]);
    }

    #[test]
    fn same_spacing_is_identity() {
        let g = Geometry::new([3, 4, 5], [1.5; 3], [1.0, 2.0, 3.0]).unwrap();
        let data: Vec<f32> = (0..60).map(|i| (i as f32).sin()).collect();
        let v = IntensityVolume::new(g, data).unwrap();
        assert_eq!(resample_isotropic(&v, 1.5).unwrap(), v);
    }

    #[test]
    fn anisotropic_ratio_one_axis_is_exact() {
        // z already at the target; its samples land exactly on voxel centres
        let g = Geometry::new([4, 2, 2], [1.0, 2.0, 2.0], [0.0; 3]).unwrap();
        let data: Vec<u8> = (0..16).map(|i| (i / 4) as u8 + 1).collect();
        let v = LabelVolume::new(g, LabelSchema::Six, data).unwrap();
        let out = resample_isotropic(&v, 1.0).unwrap();
        assert_eq!(out.dims(), [4, 4, 4]);
        for z in 0..4 {
            assert_eq!(out.at(z, 0, 0), z as u8 + 1);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let g = Geometry::new([5, 6, 7], [0.7, 1.3, 2.1], [0.0; 3]).unwrap();
        let v = IntensityVolume::filled(g, 0.1);
        for t in [0.5, 1.0, 1.7] {
            let out = resample_isotropic(&v, t).unwrap();
            assert!(out.data().iter().all(|&x| x == 0.1));
        }
    }

    #[test]
    fn trilinear_midpoint() {
        let g = Geometry::new([1, 1, 2], [1.0, 1.0, 2.0], [0.0; 3]).unwrap();
        let v = IntensityVolume::new(g, vec![0.0, 4.0]).unwrap();
        // x: extent 4 -> 4 samples at source positions -0.25, 0.25, 0.75, 1.25
        let out = resample_isotropic(&v, 1.0).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_spacing() {
        let v = IntensityVolume::filled(Geometry::isotropic([2, 2, 2], 1.0).unwrap(), 0.0);
        assert!(resample_isotropic(&v, 0.0).is_err());
        assert!(resample_isotropic(&v, f64::NAN).is_err());
    }
}
