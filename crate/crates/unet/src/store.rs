use crate::config::UNetConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Ordered, named parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> WeightStore<T> {
    pub fn new(entries: Vec<(String, Tensor<T>)>) -> Self {
        WeightStore { entries }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensor(&self, i: usize) -> &Tensor<T> {
        &self.entries[i].1
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        WeightStore {
            entries: self.entries.iter().map(|(n, t)| (n.clone(), Tensor::zeros(t.shape()))).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> WeightStore<U> {
        WeightStore {
            entries: self.entries.iter().map(|(n, t)| (n.clone(), t.cast())).collect(),
        }
    }

    /// Reorders the entries into the layer order of `config`, checking that
    /// every expected tensor is present with the right shape and nothing else is.
    pub fn conform(mut self, config: &UNetConfig) -> Result<Self> {
        let mut out = Vec::with_capacity(self.entries.len());
        for layer in config.layers() {
            let expected = [(layer.weight_name(), layer.weight_shape()), (layer.bias_name(), vec![layer.out_channels])];
            for (name, shape) in expected {
                let pos = self
                    .entries
                    .iter()
                    .position(|(n, _)| *n == name)
                    .ok_or_else(|| Error::mismatch(&layer.name, format!("tensor `{name}` is missing")))?;
                let (n, t) = self.entries.remove(pos);
                if t.shape() != shape.as_slice() {
                    return Err(Error::mismatch(
                        &layer.name,
                        format!("`{n}` has shape {:?}, expected {shape:?}", t.shape()),
                    ));
                }
                out.push((n, t));
            }
        }
        if let Some((n, _)) = self.entries.first() {
            let layer = n.rsplit_once('.').map_or(n.as_str(), |(l, _)| l);
            return Err(Error::mismatch(layer, format!("unexpected tensor `{n}`")));
        }
        Ok(WeightStore { entries: out })
    }
}
