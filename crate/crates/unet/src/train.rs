use cardiorefine_core::{FeatureGrid, LabelVolume, Volume};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::cross_entropy;
use crate::model::UNet;
use crate::optim::Adam;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    /// Drives the sample order.
    pub seed: u64,
    pub class_weights: Option<Vec<f64>>,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { lr: 1e-3, steps: 500, batch: 1, seed: 0, class_weights: None }
    }
}

/// One (input, target) pair; `input` has batch size 1.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub input: FeatureGrid<T>,
    pub target: Vec<u8>,
}

impl<T: Scalar> Sample<T> {
    pub fn new(input: FeatureGrid<T>, target: &LabelVolume) -> Result<Self> {
        if input.spatial() != target.dims() {
            return Err(Error::Shape(format!("input {:?} vs target {:?}", input.spatial(), target.dims())));
        }
        Self::from_raw(input, target.data().to_vec())
    }

    pub fn from_raw(input: FeatureGrid<T>, target: Vec<u8>) -> Result<Self> {
        if input.batch() != 1 || input.voxels() != target.len() {
            return Err(Error::Shape(format!(
                "sample input {:?} with {} targets",
                input.shape(),
                target.len()
            )));
        }
        Ok(Sample { input, target })
    }
}

/// Stacks samples along the batch axis.
fn collate<T: Scalar>(samples: &[&Sample<T>]) -> Result<(FeatureGrid<T>, Vec<u8>)> {
    let [_, c, z, y, x] = samples[0].input.shape();
    let mut data = Vec::with_capacity(samples.len() * samples[0].input.len());
    let mut target = Vec::with_capacity(samples.len() * samples[0].target.len());
    for s in samples {
        data.extend_from_slice(s.input.data());
        target.extend_from_slice(&s.target);
    }
    Ok((FeatureGrid::from_vec([samples.len(), c, z, y, x], data)?, target))
}

/// Mean loss of `model` over `data`, one sample at a time.
pub fn evaluate_loss<T: Scalar>(model: &UNet<T>, data: &[Sample<T>], class_weights: Option<&[f64]>) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        let logits = model.forward(&s.input)?;
        total += cross_entropy(&logits, &s.target, class_weights)?.0;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Step-wise trainer, so callers can interleave validation.
pub struct Trainer<'a, T> {
    model: UNet<T>,
    adam: Adam,
    data: &'a [Sample<T>],
    params: TrainParams,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    history: Vec<f64>,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(model: UNet<T>, data: &'a [Sample<T>], params: TrainParams) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        if params.batch == 0 || !(params.lr >= 0.0 && params.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("batch {} lr {}", params.batch, params.lr)));
        }
        let shape = data[0].input.shape();
        if let Some(s) = data.iter().find(|s| s.input.shape() != shape) {
            return Err(Error::Shape(format!("sample shape {:?} differs from {shape:?}", s.input.shape())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        Ok(Trainer { model, adam: Adam::new(params.lr), data, params, rng, order, cursor: 0, history: Vec::new() })
    }

    fn next_batch(&mut self) -> Vec<&'a Sample<T>> {
        let data = self.data;
        (0..self.params.batch)
            .map(|_| {
                if self.cursor == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                }
                self.cursor += 1;
                &data[self.order[self.cursor - 1]]
            })
            .collect()
    }

    /// One optimiser step; returns the loss measured before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.next_batch();
        let (input, target) = collate(&batch)?;
        let trace = self.model.forward_train(&input)?;
        let (loss, grad) = cross_entropy(trace.logits(), &target, self.params.class_weights.as_deref())?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step: self.history.len(), loss });
        }
        let grads = self.model.backward(&trace, &grad)?;
        drop(trace);
        self.adam.step(self.model.weights_mut(), &grads)?;
        self.history.push(loss);
        Ok(loss)
    }

    pub fn model(&self) -> &UNet<T> {
        &self.model
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn into_parts(self) -> (UNet<T>, Vec<f64>) {
        (self.model, self.history)
    }
}

pub struct TrainOutcome<T> {
    pub model: UNet<T>,
    pub history: Vec<f64>,
}

pub fn train<T: Scalar>(model: UNet<T>, data: &[Sample<T>], params: &TrainParams) -> Result<TrainOutcome<T>> {
    let mut trainer = Trainer::new(model, data, params.clone())?;
    for _ in 0..params.steps {
        trainer.step()?;
    }
    let (model, history) = trainer.into_parts();
    Ok(TrainOutcome { model, history })
}
