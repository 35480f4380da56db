//! Per-stage training pairs and the training driver.

use std::collections::BTreeMap;

use cardiorefine_core::labels::argmax_channels;
use cardiorefine_core::metrics::{dice_report, DiceReport};
use cardiorefine_core::{LabelSchema, LabelVolume, Structure, Volume};
use cardiorefine_unet::train::evaluate_loss;
use cardiorefine_unet::{Sample, TrainParams, Trainer, UNet, UNetConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{PreparedCase, Split};
use crate::error::{Error, Result, StageContext};
use crate::prep::{image_input, la_mask_input, label_input, AtriumWindow, GridConfig};
use crate::stage::{Stage, StageOutput, LA_PARTS};
use crate::truth::crop_top;

/// Everything needed to train one stage network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTrainingConfig {
    pub stage: Stage,
    #[serde(default = "default_width")]
    pub width_scale: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Seeds both the initial weights and the sample order.
    #[serde(default)]
    pub seed: u64,
    /// Validation period in steps; 0 validates only at the end.
    #[serde(default)]
    pub val_every: usize,
    /// Fraction of superior slices removed from extrapolation inputs.
    #[serde(default = "default_crop")]
    pub fov_crop_fraction: f64,
    /// Appends the intensity as an extra extrapolation input channel.
    #[serde(default)]
    pub with_intensity: bool,
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
}

fn default_width() -> f64 {
    1.0
}
fn default_lr() -> f64 {
    1e-3
}
fn default_steps() -> usize {
    500
}
fn default_batch() -> usize {
    1
}
fn default_crop() -> f64 {
    0.25
}

impl StageTrainingConfig {
    pub fn new(stage: Stage) -> Self {
        StageTrainingConfig {
            stage,
            width_scale: default_width(),
            lr: default_lr(),
            steps: default_steps(),
            batch: default_batch(),
            seed: 0,
            val_every: 0,
            fov_crop_fraction: default_crop(),
            with_intensity: false,
            class_weights: None,
        }
    }

    /// Network shape for this stage.
    pub fn network(&self) -> Result<UNetConfig> {
        let spec = self
            .stage
            .spec()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no network", self.stage)))?;
        let extra = usize::from(self.with_intensity && self.stage == Stage::Unet2Extrapolate);
        Ok(UNetConfig::new(spec.input.channels() + extra, spec.output.channels(), self.width_scale)?)
    }

    fn params(&self) -> TrainParams {
        TrainParams {
            lr: self.lr,
            steps: self.steps,
            batch: self.batch,
            seed: self.seed,
            class_weights: self.class_weights.clone(),
        }
    }
}

/// Input and target for one stage, with the target as a label map in the
/// stage's report schema (LA parts are reported in TEN IDs).
pub struct StagePair {
    pub sample: Sample<f32>,
    pub target: LabelVolume,
}

/// Builds the training pair of `stage` for one prepared case. `None` when
/// the case has nothing to learn for the stage (no LA for parcellation).
pub fn stage_pair(
    stage: Stage,
    case: &PreparedCase,
    grid: &GridConfig,
    cfg: &StageTrainingConfig,
) -> Result<Option<StagePair>> {
    let gt = case.truth()?;
    let (input, target) = match stage {
        Stage::Unet1 => (image_input(&case.intensity), gt.six.clone()),
        Stage::Unet1NoPa => (image_input(&case.intensity), gt.six_no_pa_refined.clone()),
        Stage::Unet4 => (image_input(&case.intensity), gt.ten.clone()),
        Stage::Unet2Extrapolate => {
            if !(0.0..0.5).contains(&cfg.fov_crop_fraction) {
                return Err(Error::InvalidArgument(format!(
                    "crop fraction {} must lie in [0, 0.5)",
                    cfg.fov_crop_fraction
                )));
            }
            let labels = crop_top(&gt.six_no_pa_refined, cfg.fov_crop_fraction);
            let img = cfg.with_intensity.then(|| crop_top(&case.intensity, cfg.fov_crop_fraction));
            (label_input(&labels, img.as_ref())?, gt.seven.clone())
        }
        Stage::Unet3Parcellate => {
            let Some(w) = AtriumWindow::locate(&gt.six_no_pa_refined, grid.atrium_dims)? else {
                return Ok(None);
            };
            let input = la_mask_input(&w.crop(&gt.six_no_pa_refined)?)?;
            (input, w.crop(&gt.ten)?)
        }
        Stage::RefineLabels | Stage::Fuse => {
            return Err(Error::InvalidArgument(format!("{stage} has no network")));
        }
    };
    let raw = match stage {
        Stage::Unet3Parcellate => ten_to_parts(target.data()),
        _ => target.data().to_vec(),
    };
    let sample = Sample::from_raw(input, raw)?;
    Ok(Some(StagePair { sample, target }))
}

/// TEN IDs to parcellation classes: background plus [`LA_PARTS`] order.
fn ten_to_parts(ten: &[u8]) -> Vec<u8> {
    let ids: Vec<u8> = LA_PARTS.iter().map(|&s| LabelSchema::Ten.id_of(s).unwrap()).collect();
    ten.iter()
        .map(|v| ids.iter().position(|id| id == v).map_or(0, |k| k as u8 + 1))
        .collect()
}

/// Parcellation classes back to TEN IDs.
pub fn parts_to_ten(classes: &[u8]) -> Vec<u8> {
    classes
        .iter()
        .map(|&c| if c == 0 { 0 } else { LabelSchema::Ten.id_of(LA_PARTS[c as usize - 1]).unwrap() })
        .collect()
}

/// Prediction of a stage network on one pair, as a label map shaped like
/// the pair's target.
pub fn predict_pair(stage: Stage, model: &UNet<f32>, pair: &StagePair) -> Result<LabelVolume> {
    let logits = model.forward(&pair.sample.input)?;
    let classes = argmax_channels(&logits, 0);
    let data = match stage.spec().map(|s| s.output) {
        Some(StageOutput::LaParts) => parts_to_ten(&classes),
        _ => classes,
    };
    Ok(pair.target.rebuild(pair.target.geometry().clone(), data))
}

/// Per-class Dice where the parcellation report only lists LA parts.
pub fn stage_report(stage: Stage, cases: &[(String, LabelVolume, LabelVolume)]) -> Result<DiceReport> {
    let schema = cases.first().map_or(LabelSchema::Ten, |c| c.2.schema());
    let refs: Vec<(String, &LabelVolume, &LabelVolume)> =
        cases.iter().map(|(id, p, r)| (id.clone(), p, r)).collect();
    let full = dice_report(&refs, schema)?;
    if stage != Stage::Unet3Parcellate {
        return Ok(full);
    }
    let keep: Vec<usize> = schema
        .structures()
        .iter()
        .enumerate()
        .filter(|(_, s)| LA_PARTS.contains(s))
        .map(|(i, _)| i)
        .collect();
    let labels: Vec<Structure> = keep.iter().map(|&i| schema.structures()[i]).collect();
    let rows = full
        .cases
        .into_iter()
        .map(|mut c| {
            c.scores = keep.iter().map(|&i| c.scores[i]).collect();
            c
        })
        .collect();
    Ok(DiceReport::from_scores(labels, rows)?)
}

pub struct StageOutcome {
    pub stage: Stage,
    pub model: UNet<f32>,
    pub history: Vec<f64>,
    /// (step count, mean validation loss) at each check.
    pub validation: Vec<(usize, f64)>,
    /// Step count of the kept checkpoint; `None` without a validation set.
    pub best_step: Option<usize>,
    pub test_report: Option<DiceReport>,
}

/// Trains one stage on the training split, keeping the checkpoint with the
/// lowest validation loss, and scores the result on the test split.
pub fn train_stage(
    cfg: &StageTrainingConfig,
    cases: &[PreparedCase],
    split: &Split,
    grid: &GridConfig,
) -> Result<StageOutcome> {
    let stage = cfg.stage;
    split.validate().in_stage(stage)?;
    let by_id: BTreeMap<&str, &PreparedCase> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let pairs = |ids: &[String]| -> Result<Vec<(String, StagePair)>> {
        let mut out = Vec::new();
        for id in ids {
            let case = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::InvalidArgument(format!("split names unknown case {id}")))?;
            if let Some(p) = stage_pair(stage, case, grid, cfg)? {
                out.push((id.clone(), p));
            }
        }
        Ok(out)
    };
    let train_pairs = pairs(&split.train).in_stage(stage)?;
    if train_pairs.is_empty() {
        return Err(Error::EmptySplit("train")).in_stage(stage);
    }
    let val: Vec<Sample<f32>> = pairs(&split.val).in_stage(stage)?.into_iter().map(|(_, p)| p.sample).collect();
    let test = pairs(&split.test).in_stage(stage)?;
    let train_samples: Vec<Sample<f32>> = train_pairs.into_iter().map(|(_, p)| p.sample).collect();

    let model = UNet::<f32>::new(cfg.network().in_stage(stage)?, cfg.seed).in_stage(stage)?;
    let mut trainer = Trainer::new(model, &train_samples, cfg.params()).in_stage(stage)?;
    let weights = cfg.class_weights.as_deref();
    let mut validation = Vec::new();
    let mut best: Option<(usize, f64, UNet<f32>)> = None;
    let mut check = |step: usize, model: &UNet<f32>| -> Result<()> {
        if val.is_empty() {
            return Ok(());
        }
        let loss = evaluate_loss(model, &val, weights)?;
        validation.push((step, loss));
        if best.as_ref().is_none_or(|b| loss < b.1) {
            best = Some((step, loss, model.clone()));
        }
        Ok(())
    };
    for step in 1..=cfg.steps {
        trainer.step().in_stage(stage)?;
        if cfg.val_every > 0 && step % cfg.val_every == 0 && step != cfg.steps {
            check(step, trainer.model()).in_stage(stage)?;
        }
    }
    check(cfg.steps, trainer.model()).in_stage(stage)?;
    let (last, history) = trainer.into_parts();
    let (model, best_step) = match best {
        Some((s, _, m)) => (m, Some(s)),
        None => (last, None),
    };

    let test_report = if test.is_empty() {
        None
    } else {
        let mut scored = Vec::new();
        for (id, p) in &test {
            scored.push((id.clone(), predict_pair(stage, &model, p).in_stage(stage)?, p.target.clone()));
        }
        Some(stage_report(stage, &scored).in_stage(stage)?)
    };
    Ok(StageOutcome { stage, model, history, validation, best_step, test_report })
}
