use cardiorefine_core::FeatureGrid;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 2x2x2 max pooling. Alongside the pooled grid it returns, per output
/// element, the offset of the winning voxel inside its input channel. Ties
/// go to the first voxel of the block in (z, y, x) order.
pub fn maxpool3d<T: Scalar>(input: &FeatureGrid<T>) -> Result<(FeatureGrid<T>, Vec<u32>)> {
    let [nz, ny, nx] = input.spatial();
    if nz % 2 != 0 || ny % 2 != 0 || nx % 2 != 0 {
        return Err(Error::IndivisibleDims { dims: [nz, ny, nx], by: 2 });
    }
    let (pz, py, px) = (nz / 2, ny / 2, nx / 2);
    let mut out = FeatureGrid::zeros([input.batch(), input.channels(), pz, py, px]);
    let mut arg = Vec::with_capacity(out.len());
    let pv = pz * py * px;
    for b in 0..input.batch() {
        for c in 0..input.channels() {
            let src = input.channel(b, c);
            let dst = out.channel_mut(b, c);
            let mut o = 0;
            for z in 0..pz {
                for y in 0..py {
                    for x in 0..px {
                        let mut best = ((2 * z * ny + 2 * y) * nx + 2 * x) as u32;
                        for dz in 0..2 {
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let i = ((2 * z + dz) * ny + 2 * y + dy) * nx + 2 * x + dx;
                                    if src[i] > src[best as usize] {
                                        best = i as u32;
                                    }
                                }
                            }
                        }
                        dst[o] = src[best as usize];
                        arg.push(best);
                        o += 1;
                    }
                }
            }
            debug_assert_eq!(o, pv);
        }
    }
    Ok((out, arg))
}

/// Routes each pooled gradient to its recorded argmax.
pub fn maxpool3d_backward<T: Scalar>(
    input_shape: [usize; 5],
    argmax: &[u32],
    grad_out: &FeatureGrid<T>,
) -> Result<FeatureGrid<T>> {
    let [b, c, nz, ny, nx] = input_shape;
    if grad_out.shape() != [b, c, nz / 2, ny / 2, nx / 2] || argmax.len() != grad_out.len() {
        return Err(Error::Shape(format!(
            "pool gradient {:?} does not match input {input_shape:?}",
            grad_out.shape()
        )));
    }
    let mut gi = FeatureGrid::zeros(input_shape);
    let pv = grad_out.voxels();
    for bi in 0..b {
        for ci in 0..c {
            let g = grad_out.channel(bi, ci);
            let base = (bi * c + ci) * pv;
            let dst = gi.channel_mut(bi, ci);
            for (o, &gv) in g.iter().enumerate() {
                let i = argmax[base + o] as usize;
                dst[i] = dst[i] + gv;
            }
        }
    }
    Ok(gi)
}
