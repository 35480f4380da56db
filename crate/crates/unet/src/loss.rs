use cardiorefine_core::{FeatureGrid, LabelVolume, Volume};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-voxel softmax over channels.
pub fn softmax<T: Scalar>(logits: &FeatureGrid<T>) -> FeatureGrid<T> {
    let mut out = logits.clone();
    let (c, v) = (logits.channels(), logits.voxels());
    let mut p = vec![0.0f64; c];
    for b in 0..logits.batch() {
        let item = out.item_mut(b);
        for i in 0..v {
            let m = (0..c).map(|ch| item[ch * v + i].f64()).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for ch in 0..c {
                p[ch] = (item[ch * v + i].f64() - m).exp();
                z += p[ch];
            }
            for ch in 0..c {
                item[ch * v + i] = T::of(p[ch] / z);
            }
        }
    }
    out
}

/// Mean cross-entropy of `logits` against one label map (batch of 1).
///
/// With class weights the loss is `sum(w_t * -log p_t) / sum(w_t)`; without
/// them it is the plain mean over voxels. The returned gradient is with
/// respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &FeatureGrid<T>,
    target: &LabelVolume,
    class_weights: Option<&[f64]>,
) -> Result<(f64, FeatureGrid<T>)> {
    if logits.batch() != 1 {
        return Err(Error::Shape(format!("expected a single batch item, got {}", logits.batch())));
    }
    if logits.channels() != target.schema().num_channels() {
        return Err(Error::ChannelMismatch {
            op: "softmax_cross_entropy",
            expected: target.schema().num_channels(),
            got: logits.channels(),
        });
    }
    if logits.spatial() != target.dims() {
        return Err(Error::Shape(format!("logits {:?} vs labels {:?}", logits.spatial(), target.dims())));
    }
    cross_entropy(logits, target.data(), class_weights)
}

/// Cross-entropy against raw class indices, `targets[b * voxels + i]`.
/// The mean runs over every voxel of every batch item.
pub fn cross_entropy<T: Scalar>(
    logits: &FeatureGrid<T>,
    targets: &[u8],
    class_weights: Option<&[f64]>,
) -> Result<(f64, FeatureGrid<T>)> {
    let (c, v) = (logits.channels(), logits.voxels());
    if targets.len() != logits.batch() * v {
        return Err(Error::Shape(format!("{} targets for {} voxels", targets.len(), logits.batch() * v)));
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= c) {
        return Err(Error::InvalidArgument(format!("target label {t} outside {c} channels")));
    }
    if let Some(w) = class_weights {
        if w.len() != c || w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument(format!("class weights {w:?} for {c} channels")));
        }
    }
    let weight = |t: u8| class_weights.map_or(1.0, |w| w[t as usize]);
    let total: f64 = targets.iter().map(|&t| weight(t)).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("class weights give zero total weight".into()));
    }

    let mut grad = FeatureGrid::zeros(logits.shape());
    let mut loss = 0.0;
    let mut p = vec![0.0f64; c];
    for b in 0..logits.batch() {
        let item = logits.item(b);
        let g = grad.item_mut(b);
        for i in 0..v {
            let t = targets[b * v + i] as usize;
            let w = weight(t as u8);
            let m = (0..c).map(|ch| item[ch * v + i].f64()).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for ch in 0..c {
                p[ch] = (item[ch * v + i].f64() - m).exp();
                z += p[ch];
            }
            loss += w * (z.ln() - (item[t * v + i].f64() - m));
            for ch in 0..c {
                let onehot = if ch == t { 1.0 } else { 0.0 };
                g[ch * v + i] = T::of(w * (p[ch] / z - onehot) / total);
            }
        }
    }
    Ok((loss / total, grad))
}
