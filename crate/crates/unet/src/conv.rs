//! 3x3x3 same-padded convolution via z-slab im2col and GEMM.
//!
//! Kernel layout `[cout, cin, 3, 3, 3]`, bias `[cout]`.

use cardiorefine_core::FeatureGrid;

use crate::error::{Error, Result};
use crate::scalar::{gemm, Mat, MatMut, Scalar};
use crate::tensor::Tensor;

/// Upper bound on im2col buffer entries; bigger volumes are processed in z slabs.
const COL_BUDGET: usize = 1 << 23;

pub struct ConvGrads<T> {
    pub input: Option<FeatureGrid<T>>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T>(input: &FeatureGrid<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize)> {
    let ks = kernel.shape();
    if ks.len() != 5 || ks[2..] != [3, 3, 3] {
        return Err(Error::Shape(format!("conv kernel must be [cout, cin, 3, 3, 3], got {ks:?}")));
    }
    if bias.shape() != [ks[0]] {
        return Err(Error::Shape(format!("conv bias shape {:?} for {} outputs", bias.shape(), ks[0])));
    }
    if input.channels() != ks[1] {
        return Err(Error::ChannelMismatch { op: "conv3d", expected: ks[1], got: input.channels() });
    }
    Ok((ks[0], ks[1]))
}

fn slab_depth(cin: usize, [nz, ny, nx]: [usize; 3]) -> usize {
    (COL_BUDGET / (cin * 27 * ny * nx)).clamp(1, nz)
}

/// Unrolls z-slices `z0..z1` into a `(cin*27) x ((z1-z0)*ny*nx)` matrix.
fn im2col<T: Scalar>(src: &[T], cin: usize, [nz, ny, nx]: [usize; 3], z0: usize, z1: usize, col: &mut [T]) {
    let v = nz * ny * nx;
    let cols = (z1 - z0) * ny * nx;
    for ci in 0..cin {
        let chan = &src[ci * v..(ci + 1) * v];
        for tap in 0..27 {
            let (kz, ky, kx) = (tap / 9, tap / 3 % 3, tap % 3);
            let row = &mut col[(ci * 27 + tap) * cols..][..cols];
            for z in z0..z1 {
                let sz = (z + kz).wrapping_sub(1);
                for y in 0..ny {
                    let sy = (y + ky).wrapping_sub(1);
                    let out = &mut row[((z - z0) * ny + y) * nx..][..nx];
                    if sz >= nz || sy >= ny {
                        out.fill(T::zero());
                        continue;
                    }
                    let line = &chan[(sz * ny + sy) * nx..][..nx];
                    match kx {
                        0 => {
                            out[0] = T::zero();
                            out[1..].copy_from_slice(&line[..nx - 1]);
                        }
                        1 => out.copy_from_slice(line),
                        _ => {
                            out[..nx - 1].copy_from_slice(&line[1..]);
                            out[nx - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds the column matrix back into `dst`.
fn col2im<T: Scalar>(col: &[T], cin: usize, [nz, ny, nx]: [usize; 3], z0: usize, z1: usize, dst: &mut [T]) {
    let v = nz * ny * nx;
    let cols = (z1 - z0) * ny * nx;
    for ci in 0..cin {
        let chan = &mut dst[ci * v..(ci + 1) * v];
        for tap in 0..27 {
            let (kz, ky, kx) = (tap / 9, tap / 3 % 3, tap % 3);
            let row = &col[(ci * 27 + tap) * cols..][..cols];
            for z in z0..z1 {
                let sz = (z + kz).wrapping_sub(1);
                if sz >= nz {
                    continue;
                }
                for y in 0..ny {
                    let sy = (y + ky).wrapping_sub(1);
                    if sy >= ny {
                        continue;
                    }
                    let src = &row[((z - z0) * ny + y) * nx..][..nx];
                    let line = &mut chan[(sz * ny + sy) * nx..][..nx];
                    let (s, d) = match kx {
                        0 => (&src[1..], &mut line[..nx - 1]),
                        1 => (src, &mut line[..]),
                        _ => (&src[..nx - 1], &mut line[1..]),
                    };
                    for (d, &s) in d.iter_mut().zip(s) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

pub fn conv3d<T: Scalar>(input: &FeatureGrid<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<FeatureGrid<T>> {
    let (cout, cin) = check(input, kernel, bias)?;
    let dims = input.spatial();
    let v = input.voxels();
    let plane = dims[1] * dims[2];
    let k = cin * 27;
    let depth = slab_depth(cin, dims);
    let mut out = FeatureGrid::zeros([input.batch(), cout, dims[0], dims[1], dims[2]]);
    let mut col = vec![T::zero(); k * depth * plane];
    let w = Mat::rm(kernel.data(), cout, k);
    for b in 0..input.batch() {
        let src = input.item(b);
        let dst = out.item_mut(b);
        for z0 in (0..dims[0]).step_by(depth) {
            let z1 = (z0 + depth).min(dims[0]);
            let n = (z1 - z0) * plane;
            im2col(src, cin, dims, z0, z1, &mut col);
            let c = MatMut { data: &mut dst[z0 * plane..], rows: cout, cols: n, rs: v, cs: 1 };
            gemm(T::one(), w, Mat::rm(&col[..k * n], k, n), T::zero(), c);
        }
        for (co, &bv) in bias.data().iter().enumerate() {
            for x in &mut dst[co * v..(co + 1) * v] {
                *x = *x + bv;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv3d`] given the forward input and the output gradient.
/// The input gradient is skipped when `want_input` is false.
pub fn conv3d_backward<T: Scalar>(
    input: &FeatureGrid<T>,
    kernel: &Tensor<T>,
    grad_out: &FeatureGrid<T>,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    let ks = kernel.shape();
    let bias = Tensor::zeros(&[ks.first().copied().unwrap_or(0)]);
    let (cout, cin) = check(input, kernel, &bias)?;
    let dims = input.spatial();
    if grad_out.shape() != [input.batch(), cout, dims[0], dims[1], dims[2]] {
        return Err(Error::Shape(format!("conv output gradient shape {:?}", grad_out.shape())));
    }
    let v = input.voxels();
    let plane = dims[1] * dims[2];
    let k = cin * 27;
    let depth = slab_depth(cin, dims);
    let mut gk = Tensor::zeros(ks);
    let mut gb = bias;
    let mut gi = want_input.then(|| FeatureGrid::zeros(input.shape()));
    let mut col = vec![T::zero(); k * depth * plane];
    let w = Mat::rm(kernel.data(), cout, k);
    for b in 0..input.batch() {
        let src = input.item(b);
        let g = grad_out.item(b);
        for (co, acc) in gb.data_mut().iter_mut().enumerate() {
            *acc = *acc + g[co * v..(co + 1) * v].iter().copied().sum();
        }
        for z0 in (0..dims[0]).step_by(depth) {
            let z1 = (z0 + depth).min(dims[0]);
            let n = (z1 - z0) * plane;
            let gslab = Mat { data: &g[z0 * plane..], rows: cout, cols: n, rs: v, cs: 1 };
            im2col(src, cin, dims, z0, z1, &mut col);
            let colm = Mat::rm(&col[..k * n], k, n);
            gemm(T::one(), gslab, colm.t(), T::one(), MatMut::rm(gk.data_mut(), cout, k));
            if let Some(gi) = gi.as_mut() {
                gemm(T::one(), w.t(), gslab, T::zero(), MatMut::rm(&mut col[..k * n], k, n));
                col2im(&col[..k * n], cin, dims, z0, z1, gi.item_mut(b));
            }
        }
    }
    Ok(ConvGrads { input: gi, kernel: gk, bias: gb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slabs_agree_with_single_pass() {
        // a budget-sized volume forces several slabs; compare with a 1-slab run on a z-crop
        let dims = [3, 2, 5];
        let x: Vec<f64> = (0..2 * 30).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut col = vec![0.0; 2 * 27 * 30];
        im2col(&x, 2, dims, 0, 3, &mut col);
        let mut parts = vec![0.0; 2 * 27 * 30];
        let mut a = vec![0.0; 2 * 27 * 20];
        let mut b = vec![0.0; 2 * 27 * 10];
        im2col(&x, 2, dims, 0, 2, &mut a);
        im2col(&x, 2, dims, 2, 3, &mut b);
        for r in 0..54 {
            parts[r * 30..r * 30 + 20].copy_from_slice(&a[r * 20..r * 20 + 20]);
            parts[r * 30 + 20..r * 30 + 30].copy_from_slice(&b[r * 10..r * 10 + 10]);
        }
        assert_eq!(col, parts);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let dims = [3, 4, 2];
        let v = 24;
        let x: Vec<f64> = (0..v).map(|i| (i as f64 * 0.7).cos()).collect();
        let c: Vec<f64> = (0..27 * v).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut col = vec![0.0; 27 * v];
        im2col(&x, 1, dims, 0, 3, &mut col);
        let lhs: f64 = col.iter().zip(&c).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; v];
        col2im(&c, 1, dims, 0, 3, &mut back);
        let rhs: f64 = back.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
