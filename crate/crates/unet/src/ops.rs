//! Pointwise activation and channel concatenation.

use cardiorefine_core::FeatureGrid;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// NaN passes through so a diverging run is caught by the loss check.
pub fn relu_in_place<T: Scalar>(grid: &mut FeatureGrid<T>) {
    for v in grid.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries where the activation output was not positive.
pub fn relu_backward_in_place<T: Scalar>(grad: &mut FeatureGrid<T>, output: &FeatureGrid<T>) {
    assert_eq!(grad.shape(), output.shape());
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        if !(y > T::zero()) {
            *g = T::zero();
        }
    }
}

/// Stacks `a` then `b` along the channel axis.
pub fn concat_channels<T: Scalar>(a: &FeatureGrid<T>, b: &FeatureGrid<T>) -> Result<FeatureGrid<T>> {
    let [ba, ca, z, y, x] = a.shape();
    let [bb, cb, zb, yb, xb] = b.shape();
    if ba != bb || [z, y, x] != [zb, yb, xb] {
        return Err(Error::Shape(format!("cannot concatenate {:?} with {:?}", a.shape(), b.shape())));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..ba {
        data.extend_from_slice(a.item(i));
        data.extend_from_slice(b.item(i));
    }
    Ok(FeatureGrid::from_vec([ba, ca + cb, z, y, x], data)?)
}

/// Inverse of [`concat_channels`]: the first `first` channels, then the rest.
pub fn split_channels<T: Scalar>(grid: &FeatureGrid<T>, first: usize) -> Result<(FeatureGrid<T>, FeatureGrid<T>)> {
    let [b, c, z, y, x] = grid.shape();
    if first == 0 || first >= c {
        return Err(Error::Shape(format!("cannot split {c} channels at {first}")));
    }
    let v = grid.voxels();
    let (mut lo, mut hi) = (Vec::with_capacity(b * first * v), Vec::with_capacity(b * (c - first) * v));
    for i in 0..b {
        let item = grid.item(i);
        lo.extend_from_slice(&item[..first * v]);
        hi.extend_from_slice(&item[first * v..]);
    }
    Ok((
        FeatureGrid::from_vec([b, first, z, y, x], lo)?,
        FeatureGrid::from_vec([b, c - first, z, y, x], hi)?,
    ))
}
