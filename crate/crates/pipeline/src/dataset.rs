//! Cases, deterministic splits and working-grid preparation.

use cardiorefine_core::labels::Annotations;
use cardiorefine_core::phantom::Phantom;
use cardiorefine_core::{IntensityVolume, LabelSchema, LabelVolume};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prep::{centered_transform, fit_transform, GridConfig, GridTransform};
use crate::truth::{build_ground_truth, GroundTruth};

/// One image with optional reference labels and annotations, on its native grid.
#[derive(Clone, Debug)]
pub struct Case {
    pub id: String,
    pub intensity: IntensityVolume,
    pub labels: Option<LabelVolume>,
    pub annotations: Option<Annotations>,
}

impl Case {
    pub fn from_phantom(id: impl Into<String>, phantom: &Phantom) -> Self {
        Case {
            id: id.into(),
            intensity: phantom.intensity.clone(),
            labels: Some(phantom.labels.clone()),
            annotations: Some(phantom.annotations.clone()),
        }
    }

    /// Derives the ground truth on the native grid, then moves the image and
    /// every target onto the heart window.
    pub fn prepare(&self, grid: &GridConfig) -> Result<PreparedCase> {
        grid.validate()?;
        let labels = self.labels.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("case {} has no reference labels", self.id))
        })?;
        let ann = self.annotations.as_ref().ok_or_else(|| Error::MissingAnnotations(self.id.clone()))?;
        let truth = build_ground_truth(&self.intensity, labels, ann)?;
        let t = fit_transform(&self.intensity, &truth.ten, grid)?;
        let truth = GroundTruth {
            six: t.apply(&truth.six)?,
            six_no_pa_refined: t.apply(&truth.six_no_pa_refined)?,
            seven: t.apply(&truth.seven)?,
            ten: t.apply(&truth.ten)?,
            myo_transferred: truth.myo_transferred,
        };
        Ok(PreparedCase { id: self.id.clone(), intensity: t.apply(&self.intensity)?, truth: Some(truth), transform: t })
    }

    /// Image-only preparation for inference; reference labels, when
    /// present, steer the window and come along in TEN form.
    pub fn prepare_image(&self, grid: &GridConfig) -> Result<(PreparedCase, Option<LabelVolume>)> {
        grid.validate()?;
        let reference = match &self.labels {
            Some(l) => Some(l.merge_into(LabelSchema::Ten).or_else(|_| Ok::<_, Error>(l.clone()))?),
            None => None,
        };
        let t = match &reference {
            Some(r) => fit_transform(&self.intensity, r, grid)?,
            None => centered_transform(&self.intensity, grid)?,
        };
        let reference = reference.map(|r| t.apply(&r)).transpose()?;
        let prepared = PreparedCase { id: self.id.clone(), intensity: t.apply(&self.intensity)?, truth: None, transform: t };
        Ok((prepared, reference))
    }
}

/// A case on the heart window.
#[derive(Clone, Debug)]
pub struct PreparedCase {
    pub id: String,
    pub intensity: IntensityVolume,
    pub truth: Option<GroundTruth>,
    pub transform: GridTransform,
}

impl PreparedCase {
    pub fn truth(&self) -> Result<&GroundTruth> {
        self.truth.as_ref().ok_or_else(|| Error::InvalidArgument(format!("case {} has no ground truth", self.id)))
    }
}

/// Case IDs partitioned into training, validation and test sets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl Split {
    /// 200 / 30 / 30.
    pub const DEFAULT_RATIOS: [f64; 3] = [200.0, 30.0, 30.0];

    /// Shuffles `ids` with a seeded generator and cuts them by `ratios`
    /// (train, val, test). Validation and test sizes are rounded; training
    /// takes the remainder and must not be empty.
    pub fn by_ratio(ids: &[String], ratios: [f64; 3], seed: u64) -> Result<Split> {
        if ratios.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || ratios.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument(format!("split ratios {ratios:?}")));
        }
        let mut order = ids.to_vec();
        order.sort();
        order.dedup();
        if order.len() != ids.len() {
            return Err(Error::InvalidArgument("duplicate case ids".into()));
        }
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let total: f64 = ratios.iter().sum();
        let n = order.len();
        let n_val = ((n as f64 * ratios[1] / total).round() as usize).min(n);
        let n_test = ((n as f64 * ratios[2] / total).round() as usize).min(n - n_val);
        let test = order.split_off(n - n_test);
        let val = order.split_off(n - n_test - n_val);
        if order.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        Ok(Split { train: order, val, test })
    }

    /// Everything in training.
    pub fn train_only(ids: &[String]) -> Split {
        Split { train: ids.to_vec(), ..Split::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        let mut all: Vec<&String> = self.train.iter().chain(&self.val).chain(&self.test).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        if all.len() != n {
            return Err(Error::InvalidArgument("a case appears in more than one split".into()));
        }
        Ok(())
    }
}
