use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::WeightStore;

/// Adam with bias correction. Moments are kept in f64 regardless of `T`.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step<T: Scalar>(&mut self, weights: &mut WeightStore<T>, grads: &WeightStore<T>) -> Result<()> {
        if weights.len() != grads.len() {
            return Err(Error::Shape(format!("{} gradients for {} tensors", grads.len(), weights.len())));
        }
        if self.m.is_empty() {
            self.m = weights.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, ((name, w), (_, g))) in weights.iter_mut().zip(grads.iter()).enumerate() {
            if w.len() != g.len() || self.m[k].len() != w.len() {
                return Err(Error::mismatch(name, "gradient size differs from weight size"));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, (wi, gi)) in w.data_mut().iter_mut().zip(g.data()).enumerate() {
                let gi = gi.f64();
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let upd = self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                *wi = T::of(wi.f64() - upd);
            }
        }
        Ok(())
    }
}
