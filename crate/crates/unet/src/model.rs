//! The network: three contraction stages with max pooling, a bottleneck,
//! and three expansion stages that upsample, concatenate the matching
//! contraction output, and convolve.

use cardiorefine_core::FeatureGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{LayerKind, LayerSpec, UNetConfig};
use crate::conv::{conv3d, conv3d_backward};
use crate::deconv::{deconv3d, deconv3d_backward};
use crate::error::{Error, Result};
use crate::ops::{concat_channels, relu_backward_in_place, relu_in_place, split_channels};
use crate::pool::{maxpool3d, maxpool3d_backward};
use crate::scalar::Scalar;
use crate::store::WeightStore;
use crate::tensor::Tensor;

const LEVELS: usize = 3;
const BOTTOM: usize = 2 * LEVELS;
const UP: usize = BOTTOM + 2;

#[derive(Clone, Debug)]
pub struct UNet<T> {
    config: UNetConfig,
    layers: Vec<LayerSpec>,
    weights: WeightStore<T>,
}

struct EncTrace<T> {
    a: FeatureGrid<T>,
    skip: FeatureGrid<T>,
    argmax: Vec<u32>,
    pooled: FeatureGrid<T>,
}

struct DecTrace<T> {
    up: FeatureGrid<T>,
    cat: FeatureGrid<T>,
    out: FeatureGrid<T>,
}

/// Activations kept by [`UNet::forward_train`] for the backward pass.
pub struct Trace<T> {
    input: FeatureGrid<T>,
    enc: Vec<EncTrace<T>>,
    b1: FeatureGrid<T>,
    b2: FeatureGrid<T>,
    dec: Vec<DecTrace<T>>,
}

impl<T> Trace<T> {
    pub fn logits(&self) -> &FeatureGrid<T> {
        &self.dec[LEVELS - 1].out
    }
}

impl<T: Scalar> UNet<T> {
    /// He-normal kernels drawn from a seeded stream, zero biases.
    pub fn new(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = config.layers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::with_capacity(2 * layers.len());
        for l in &layers {
            let std = (2.0 / (l.in_channels * l.taps()) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            let shape = l.weight_shape();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| T::of(normal.sample(&mut rng))).collect();
            entries.push((l.weight_name(), Tensor::from_vec(&shape, data)?));
            entries.push((l.bias_name(), Tensor::zeros(&[l.out_channels])));
        }
        Ok(UNet { config, layers, weights: WeightStore::new(entries) })
    }

    pub fn from_weights(config: UNetConfig, weights: WeightStore<T>) -> Result<Self> {
        config.validate()?;
        let weights = weights.conform(&config)?;
        Ok(UNet { layers: config.layers(), config, weights })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &WeightStore<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightStore<T> {
        &mut self.weights
    }

    pub fn into_weights(self) -> WeightStore<T> {
        self.weights
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.parameter_count()
    }

    pub fn cast<U: Scalar>(&self) -> UNet<U> {
        UNet {
            config: self.config.clone(),
            layers: self.layers.clone(),
            weights: self.weights.cast(),
        }
    }

    fn params(&self, i: usize) -> (&Tensor<T>, &Tensor<T>) {
        (self.weights.tensor(2 * i), self.weights.tensor(2 * i + 1))
    }

    fn apply(&self, i: usize, x: &FeatureGrid<T>) -> Result<FeatureGrid<T>> {
        let (w, b) = self.params(i);
        let mut y = match self.layers[i].kind {
            LayerKind::Conv => conv3d(x, w, b)?,
            LayerKind::Deconv => deconv3d(x, w, b)?,
        };
        if self.layers[i].relu {
            relu_in_place(&mut y);
        }
        Ok(y)
    }

    fn check_input(&self, input: &FeatureGrid<T>) -> Result<()> {
        if input.channels() != self.config.in_channels {
            return Err(Error::ChannelMismatch {
                op: "unet_forward",
                expected: self.config.in_channels,
                got: input.channels(),
            });
        }
        self.config.check_dims(input.spatial())
    }

    /// Inference pass. Only the skip tensors outlive their stage, which keeps
    /// peak memory near three full-resolution activations.
    pub fn forward(&self, input: &FeatureGrid<T>) -> Result<FeatureGrid<T>> {
        self.check_input(input)?;
        let mut skips = Vec::with_capacity(LEVELS);
        let mut cur: Option<FeatureGrid<T>> = None;
        for l in 0..LEVELS {
            let src = cur.as_ref().unwrap_or(input);
            let a = self.apply(2 * l, src)?;
            let s = self.apply(2 * l + 1, &a)?;
            drop(a);
            let (p, _) = maxpool3d(&s)?;
            skips.push(s);
            cur = Some(p);
        }
        let b1 = self.apply(BOTTOM, cur.as_ref().unwrap())?;
        let mut cur = self.apply(BOTTOM + 1, &b1)?;
        drop(b1);
        for j in 0..LEVELS {
            let up = self.apply(UP + 2 * j, &cur)?;
            let skip = skips.pop().unwrap();
            let cat = concat_channels(&up, &skip)?;
            drop((up, skip));
            cur = self.apply(UP + 2 * j + 1, &cat)?;
        }
        Ok(cur)
    }

    /// Forward pass that records what [`UNet::backward`] needs.
    pub fn forward_train(&self, input: &FeatureGrid<T>) -> Result<Trace<T>> {
        self.check_input(input)?;
        let mut enc: Vec<EncTrace<T>> = Vec::with_capacity(LEVELS);
        for l in 0..LEVELS {
            let src = enc.last().map_or(input, |e| &e.pooled);
            let a = self.apply(2 * l, src)?;
            let skip = self.apply(2 * l + 1, &a)?;
            let (pooled, argmax) = maxpool3d(&skip)?;
            enc.push(EncTrace { a, skip, argmax, pooled });
        }
        let b1 = self.apply(BOTTOM, &enc[LEVELS - 1].pooled)?;
        let b2 = self.apply(BOTTOM + 1, &b1)?;
        let mut dec: Vec<DecTrace<T>> = Vec::with_capacity(LEVELS);
        for j in 0..LEVELS {
            let src = dec.last().map_or(&b2, |d| &d.out);
            let up = self.apply(UP + 2 * j, src)?;
            let cat = concat_channels(&up, &enc[LEVELS - 1 - j].skip)?;
            let out = self.apply(UP + 2 * j + 1, &cat)?;
            dec.push(DecTrace { up, cat, out });
        }
        Ok(Trace { input: input.clone(), enc, b1, b2, dec })
    }

    /// Parameter gradients given the gradient of the loss w.r.t. the logits.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &FeatureGrid<T>) -> Result<WeightStore<T>> {
        if grad_logits.shape() != trace.logits().shape() {
            return Err(Error::Shape(format!(
                "logit gradient {:?} vs logits {:?}",
                grad_logits.shape(),
                trace.logits().shape()
            )));
        }
        let mut grads = self.weights.zeros_like();
        let mut put = |i: usize, k: Tensor<T>, b: Tensor<T>| {
            for (slot, t) in [(2 * i, k), (2 * i + 1, b)] {
                let (_, dst) = grads.iter_mut().nth(slot).unwrap();
                *dst = t;
            }
        };
        let mut skip_grads: Vec<Option<FeatureGrid<T>>> = (0..LEVELS).map(|_| None).collect();

        let mut g = grad_logits.clone();
        for j in (0..LEVELS).rev() {
            let d = &trace.dec[j];
            let ci = UP + 2 * j + 1;
            if self.layers[ci].relu {
                relu_backward_in_place(&mut g, &d.out);
            }
            let cg = conv3d_backward(&d.cat, self.params(ci).0, &g, true)?;
            put(ci, cg.kernel, cg.bias);
            let (mut gu, gs) = split_channels(&cg.input.unwrap(), d.up.channels())?;
            skip_grads[LEVELS - 1 - j] = Some(gs);
            relu_backward_in_place(&mut gu, &d.up);
            let src = if j == 0 { &trace.b2 } else { &trace.dec[j - 1].out };
            let dg = deconv3d_backward(src, self.params(ci - 1).0, &gu)?;
            put(ci - 1, dg.kernel, dg.bias);
            g = dg.input;
        }

        relu_backward_in_place(&mut g, &trace.b2);
        let cg = conv3d_backward(&trace.b1, self.params(BOTTOM + 1).0, &g, true)?;
        put(BOTTOM + 1, cg.kernel, cg.bias);
        g = cg.input.unwrap();
        relu_backward_in_place(&mut g, &trace.b1);
        let cg = conv3d_backward(&trace.enc[LEVELS - 1].pooled, self.params(BOTTOM).0, &g, true)?;
        put(BOTTOM, cg.kernel, cg.bias);
        g = cg.input.unwrap();

        for l in (0..LEVELS).rev() {
            let e = &trace.enc[l];
            let mut gs = maxpool3d_backward(e.skip.shape(), &e.argmax, &g)?;
            if let Some(extra) = skip_grads[l].take() {
                for (a, &b) in gs.data_mut().iter_mut().zip(extra.data()) {
                    *a = *a + b;
                }
            }
            relu_backward_in_place(&mut gs, &e.skip);
            let cg = conv3d_backward(&e.a, self.params(2 * l + 1).0, &gs, true)?;
            put(2 * l + 1, cg.kernel, cg.bias);
            let mut ga = cg.input.unwrap();
            relu_backward_in_place(&mut ga, &e.a);
            let src = if l == 0 { &trace.input } else { &trace.enc[l - 1].pooled };
            let cg = conv3d_backward(src, self.params(2 * l).0, &ga, l > 0)?;
            put(2 * l, cg.kernel, cg.bias);
            if let Some(gi) = cg.input {
                g = gi;
            }
        }
        Ok(grads)
    }
}
