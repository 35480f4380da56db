//! Dense multi-channel feature grids, laid out `(batch, channel, z, y, x)`
//! with `x` fastest.

use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid<T> {
    shape: [usize; 5],
    data: Vec<T>,
}

impl<T: Float> FeatureGrid<T> {
    pub fn zeros(shape: [usize; 5]) -> Self {
        FeatureGrid {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 5], data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "feature grid shape {shape:?} has a zero dim"
            )));
        }
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill shape {shape:?}",
                data.len()
            )));
        }
        Ok(FeatureGrid { shape, data })
    }

    pub fn cast<U: Float>(&self) -> FeatureGrid<U> {
        FeatureGrid {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::from(v).unwrap()).collect(),
        }
    }
}

impl<T> FeatureGrid<T> {
    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn spatial(&self) -> [usize; 3] {
        [self.shape[2], self.shape[3], self.shape[4]]
    }

    pub fn voxels(&self) -> usize {
        self.shape[2] * self.shape[3] * self.shape[4]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, z: usize, y: usize, x: usize) -> usize {
        (((b * self.shape[1] + c) * self.shape[2] + z) * self.shape[3] + y) * self.shape[4] + x
    }

    /// Contiguous voxels of one channel of one batch item.
    pub fn channel(&self, b: usize, c: usize) -> &[T] {
        let v = self.voxels();
        let start = (b * self.shape[1] + c) * v;
        &self.data[start..start + v]
    }

    pub fn channel_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let v = self.voxels();
        let start = (b * self.shape[1] + c) * v;
        &mut self.data[start..start + v]
    }

    /// All channels of one batch item.
    pub fn item(&self, b: usize) -> &[T] {
        let n = self.shape[1] * self.voxels();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.shape[1] * self.voxels();
        &mut self.data[b * n..(b + 1) * n]
    }
}
