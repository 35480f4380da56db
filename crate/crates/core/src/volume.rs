//! Volume containers.
//!
//! All grids use `(z, y, x)` axis order with `x` varying fastest, so the
//! linear index of voxel `(z, y, x)` is `(z * ny + y) * nx + x`. Spacing and
//! origin are given in millimetres in the same order. The physical centre of
//! voxel `(z, y, x)` along an axis is `origin + index * spacing`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{LabelSchema, Structure};

/// Grid dimensions, voxel spacing and origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("degenerate dims {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite origin {origin:?}"
            )));
        }
        Ok(Geometry {
            dims,
            spacing,
            origin,
        })
    }

    /// Isotropic grid with its origin at zero.
    pub fn isotropic(dims: [usize; 3], spacing: f64) -> Result<Self> {
        Geometry::new(dims, [spacing; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    #[inline]
    pub fn coord(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], x]
    }

    /// Physical position of a voxel centre.
    pub fn physical(&self, coord: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + coord[a] as f64 * self.spacing[a])
    }

    pub fn is_isotropic(&self) -> bool {
        let s = self.spacing[0];
        self.spacing.iter().all(|&v| (v - s).abs() <= 1e-9 * s)
    }

    /// Physical extent covered by the grid along each axis.
    pub fn extent(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.dims[a] as f64 * self.spacing[a])
    }

    /// Same dims, and spacing/origin equal up to single-precision rounding.
    pub fn matches(&self, other: &Geometry) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs()));
        self.dims == other.dims
            && (0..3).all(|a| close(self.spacing[a], other.spacing[a]))
            && (0..3).all(|a| close(self.origin[a], other.origin[a]))
    }

    pub fn ensure_matches(&self, other: &Geometry) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{:?}@{:?} vs {:?}@{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Common access to intensity and label grids.
pub trait Volume: Clone {
    type Voxel: Copy + PartialEq + std::fmt::Debug;

    fn geometry(&self) -> &Geometry;
    fn data(&self) -> &[Self::Voxel];
    /// A volume of the same kind (and schema) on a new grid.
    fn rebuild(&self, geometry: Geometry, data: Vec<Self::Voxel>) -> Self;
    /// Value used for voxels that fall outside the source grid.
    fn default_fill(&self) -> Self::Voxel;

    fn dims(&self) -> [usize; 3] {
        self.geometry().dims
    }
}

/// Scalar attenuation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityVolume {
    geometry: Geometry,
    data: Vec<f32>,
}

impl IntensityVolume {
    pub fn new(geometry: Geometry, data: Vec<f32>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(IntensityVolume { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: f32) -> Self {
        let data = vec![value; geometry.len()];
        IntensityVolume { geometry, data }
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn min_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn at(&self, z: usize, y: usize, x: usize) -> f32 {
        self.data[self.geometry.index(z, y, x)]
    }

    /// Zero-mean, unit-variance copy (returned as `f64` for network input).
    pub fn standardized(&self) -> Vec<f64> {
        let n = self.data.len() as f64;
        let mean = self.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = self
            .data
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        self.data.iter().map(|&v| (v as f64 - mean) / sd).collect()
    }
}

impl Volume for IntensityVolume {
    type Voxel = f32;

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn data(&self) -> &[f32] {
        &self.data
    }

    fn rebuild(&self, geometry: Geometry, data: Vec<f32>) -> Self {
        debug_assert_eq!(geometry.len(), data.len());
        IntensityVolume { geometry, data }
    }

    fn default_fill(&self) -> f32 {
        self.min_value()
    }
}

/// Anatomical label grid tied to a [`LabelSchema`].
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    geometry: Geometry,
    schema: LabelSchema,
    data: Vec<u8>,
}

impl LabelVolume {
    /// Validates that every ID is background or declared by `schema`.
    pub fn new(geometry: Geometry, schema: LabelSchema, data: Vec<u8>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        let max = schema.max_id();
        if let Some(index) = data.iter().position(|&v| v > max) {
            return Err(Error::InvalidLabel {
                value: data[index] as f64,
                index,
            });
        }
        Ok(LabelVolume {
            geometry,
            schema,
            data,
        })
    }

    pub fn background(geometry: Geometry, schema: LabelSchema) -> Self {
        let data = vec![0; geometry.len()];
        LabelVolume {
            geometry,
            schema,
            data,
        }
    }

    pub fn schema(&self) -> LabelSchema {
        self.schema
    }

    pub fn at(&self, z: usize, y: usize, x: usize) -> u8 {
        self.data[self.geometry.index(z, y, x)]
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn count(&self, id: u8) -> usize {
        self.data.iter().filter(|&&v| v == id).count()
    }

    pub fn count_structure(&self, structure: Structure) -> usize {
        self.schema.id_of(structure).map_or(0, |id| self.count(id))
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Voxel counts per ID, indexed `0..=max_id`.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.schema.num_channels()];
        for &v in &self.data {
            h[v as usize] += 1;
        }
        h
    }

    /// Relabels through the schema merge map into a coarser schema.
    pub fn merge_into(&self, coarse: LabelSchema) -> Result<LabelVolume> {
        let table = self.schema.merge_map(coarse)?;
        let data = self.data.iter().map(|&v| table[v as usize]).collect();
        Ok(LabelVolume {
            geometry: self.geometry.clone(),
            schema: coarse,
            data,
        })
    }

    /// Same voxel IDs reinterpreted under another schema; fails if an ID
    /// is not declared there.
    pub fn with_schema(&self, schema: LabelSchema) -> Result<LabelVolume> {
        LabelVolume::new(self.geometry.clone(), schema, self.data.clone())
    }

    pub fn ensure_schema(&self, expected: LabelSchema) -> Result<()> {
        if self.schema == expected {
            Ok(())
        } else {
            Err(Error::SchemaMismatch {
                expected: expected.to_string(),
                found: self.schema.to_string(),
            })
        }
    }

    /// Inclusive bounding box `(min, max)` of voxels accepted by `pred`.
    pub fn bounding_box_where(
        &self,
        pred: impl Fn(u8) -> bool,
    ) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &v) in self.data.iter().enumerate() {
            if pred(v) {
                any = true;
                let c = self.geometry.coord(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Inclusive bounding box of all non-background voxels.
    pub fn foreground_bounds(&self) -> Option<([usize; 3], [usize; 3])> {
        self.bounding_box_where(|v| v != 0)
    }
}

impl Volume for LabelVolume {
    type Voxel = u8;

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn data(&self) -> &[u8] {
        &self.data
    }

    fn rebuild(&self, geometry: Geometry, data: Vec<u8>) -> Self {
        debug_assert_eq!(geometry.len(), data.len());
        LabelVolume {
            geometry,
            schema: self.schema,
            data,
        }
    }

    fn default_fill(&self) -> u8 {
        0
    }
}
