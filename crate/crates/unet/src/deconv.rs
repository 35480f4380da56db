//! 2x2x2 stride-2 transposed convolution. Kernel layout `[cout, cin, 2, 2, 2]`.
//!
//! Each of the 8 taps is an independent `cout x cin` matrix applied to every
//! input voxel and written to one corner of the matching output block.

use cardiorefine_core::FeatureGrid;

use crate::error::{Error, Result};
use crate::scalar::{gemm, Mat, MatMut, Scalar};
use crate::tensor::Tensor;

pub struct DeconvGrads<T> {
    pub input: FeatureGrid<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T>(input: &FeatureGrid<T>, kernel: &Tensor<T>) -> Result<(usize, usize)> {
    let ks = kernel.shape();
    if ks.len() != 5 || ks[2..] != [2, 2, 2] {
        return Err(Error::Shape(format!("deconv kernel must be [cout, cin, 2, 2, 2], got {ks:?}")));
    }
    if input.channels() != ks[1] {
        return Err(Error::ChannelMismatch { op: "deconv3d", expected: ks[1], got: input.channels() });
    }
    Ok((ks[0], ks[1]))
}

/// Tap `t` as a `cout x cin` view into the kernel.
fn tap<T>(kernel: &[T], t: usize, cout: usize, cin: usize) -> Mat<'_, T> {
    Mat { data: &kernel[t..], rows: cout, cols: cin, rs: cin * 8, cs: 8 }
}

/// Visits every (input voxel, output voxel) pair belonging to tap `t`.
fn for_tap(t: usize, [nz, ny, nx]: [usize; 3], mut f: impl FnMut(usize, usize)) {
    let (a, b, c) = (t >> 2, (t >> 1) & 1, t & 1);
    let (oy, ox) = (2 * ny, 2 * nx);
    let mut i = 0;
    for z in 0..nz {
        for y in 0..ny {
            let row = ((2 * z + a) * oy + 2 * y + b) * ox + c;
            for x in 0..nx {
                f(i, row + 2 * x);
                i += 1;
            }
        }
    }
}

pub fn deconv3d<T: Scalar>(input: &FeatureGrid<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<FeatureGrid<T>> {
    let (cout, cin) = check(input, kernel)?;
    if bias.shape() != [cout] {
        return Err(Error::Shape(format!("deconv bias shape {:?} for {cout} outputs", bias.shape())));
    }
    let dims = input.spatial();
    let v = input.voxels();
    let ov = 8 * v;
    let mut out = FeatureGrid::zeros([input.batch(), cout, 2 * dims[0], 2 * dims[1], 2 * dims[2]]);
    let mut tmp = vec![T::zero(); cout * v];
    for b in 0..input.batch() {
        let x = Mat::rm(input.item(b), cin, v);
        let dst = out.item_mut(b);
        for t in 0..8 {
            gemm(T::one(), tap(kernel.data(), t, cout, cin), x, T::zero(), MatMut::rm(&mut tmp, cout, v));
            for co in 0..cout {
                let src = &tmp[co * v..(co + 1) * v];
                let d = &mut dst[co * ov..(co + 1) * ov];
                let bv = bias.data()[co];
                for_tap(t, dims, |i, o| d[o] = src[i] + bv);
            }
        }
    }
    Ok(out)
}

pub fn deconv3d_backward<T: Scalar>(
    input: &FeatureGrid<T>,
    kernel: &Tensor<T>,
    grad_out: &FeatureGrid<T>,
) -> Result<DeconvGrads<T>> {
    let (cout, cin) = check(input, kernel)?;
    let dims = input.spatial();
    if grad_out.shape() != [input.batch(), cout, 2 * dims[0], 2 * dims[1], 2 * dims[2]] {
        return Err(Error::Shape(format!("deconv output gradient shape {:?}", grad_out.shape())));
    }
    let v = input.voxels();
    let ov = 8 * v;
    let mut gi = FeatureGrid::zeros(input.shape());
    let mut gk = Tensor::zeros(kernel.shape());
    let mut gb = Tensor::zeros(&[cout]);
    let mut gy = vec![T::zero(); cout * v];
    for b in 0..input.batch() {
        let x = Mat::rm(input.item(b), cin, v);
        let g = grad_out.item(b);
        for (co, acc) in gb.data_mut().iter_mut().enumerate() {
            *acc = *acc + g[co * ov..(co + 1) * ov].iter().copied().sum();
        }
        for t in 0..8 {
            for co in 0..cout {
                let src = &g[co * ov..(co + 1) * ov];
                let d = &mut gy[co * v..(co + 1) * v];
                for_tap(t, dims, |i, o| d[i] = src[o]);
            }
            let gym = Mat::rm(&gy, cout, v);
            gemm(T::one(), tap(kernel.data(), t, cout, cin).t(), gym, T::one(), MatMut::rm(gi.item_mut(b), cin, v));
            let gkt = MatMut { data: &mut gk.data_mut()[t..], rows: cout, cols: cin, rs: cin * 8, cs: 8 };
            gemm(T::one(), gym, x.t(), T::one(), gkt);
        }
    }
    Ok(DeconvGrads { input: gi, kernel: gk, bias: gb })
}
