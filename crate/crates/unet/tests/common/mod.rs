#![allow(dead_code)]

use cardiorefine_core::FeatureGrid;
use cardiorefine_unet::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn values(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn grid(r: &mut ChaCha8Rng, shape: [usize; 5]) -> FeatureGrid<f64> {
    FeatureGrid::from_vec(shape, values(r, shape.iter().product())).unwrap()
}

pub fn tensor(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(shape, values(r, shape.iter().product())).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst `|a - n| / max(|a|, |n|, floor)` over one gradient tensor. The
/// floor is 1% of the tensor's largest analytic component: central
/// differences at this step carry ~1e-10 of rounding noise, so entries that
/// nearly cancel are judged on the tensor's scale instead.
pub fn worst_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    worst_rel_err_scaled(analytic, numeric, analytic)
}

/// As [`worst_rel_err`] for a sample of entries, with the floor taken from
/// the whole analytic tensor `full`.
pub fn worst_rel_err_scaled(analytic: &[f64], numeric: &[f64], full: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-2 * scale).max(f64::MIN_POSITIVE);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central difference of `f` with respect to `x[i]`.
pub fn central(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + EPS;
    let up = f(x);
    x[i] = orig - EPS;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * EPS)
}

/// Central differences of `f` for every component of `x`.
pub fn numeric_grad(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len()).map(|i| central(x, i, &mut f)).collect()
}
