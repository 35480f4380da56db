//! Multi-stage and direct inference on the heart window.

use std::collections::BTreeMap;
use std::path::Path;

use cardiorefine_core::labels::{
    argmax_channels, argmax_decode, fuse_predictions, largest_component_cleanup, lv_myo_reassign, split_by_plane,
    Annotations, Connectivity,
};
use cardiorefine_core::{IntensityVolume, LabelSchema, LabelVolume, Structure, Volume, SINGLE_OBJECT};
use cardiorefine_unet::weights::to_bytes;
use cardiorefine_unet::{load_weights, UNet};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, StageContext};
use crate::prep::{drop_pa, image_input, la_mask_input, label_input, AtriumWindow, GridConfig};
use crate::stage::Stage;
use crate::training::parts_to_ten;

/// Stage networks with the SHA-256 of their serialised weights.
#[derive(Default)]
pub struct ModelSet {
    models: BTreeMap<Stage, (UNet<f32>, String)>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a model after checking its channels against the stage.
    pub fn insert(&mut self, stage: Stage, model: UNet<f32>) -> Result<()> {
        let hash = hex::encode(Sha256::digest(to_bytes(&model)));
        self.insert_hashed(stage, model, hash)
    }

    fn insert_hashed(&mut self, stage: Stage, model: UNet<f32>, hash: String) -> Result<()> {
        let spec = stage.spec().ok_or_else(|| Error::StageList(format!("{stage} takes no model")))?;
        let c = model.config();
        let inputs_ok = c.in_channels == spec.input.channels()
            || (stage == Stage::Unet2Extrapolate && c.in_channels == spec.input.channels() + 1);
        if !inputs_ok || c.out_channels != spec.output.channels() {
            return Err(Error::InvalidArgument(format!(
                "{stage} model maps {} -> {} channels, expected {} -> {}",
                c.in_channels,
                c.out_channels,
                spec.input.channels(),
                spec.output.channels()
            )));
        }
        self.models.insert(stage, (model, hash));
        Ok(())
    }

    /// Loads `.w3u` files; the hash covers the file bytes.
    pub fn load(paths: &BTreeMap<Stage, impl AsRef<Path>>) -> Result<Self> {
        let mut set = ModelSet::new();
        for (&stage, path) in paths {
            let path = path.as_ref();
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let model = load_weights::<f32>(path).in_stage(stage)?;
            set.insert_hashed(stage, model, hex::encode(Sha256::digest(&bytes))).in_stage(stage)?;
        }
        Ok(set)
    }

    pub fn get(&self, stage: Stage) -> Result<&UNet<f32>> {
        self.models.get(&stage).map(|m| &m.0).ok_or(Error::MissingModel(stage))
    }

    pub fn hash(&self, stage: Stage) -> Option<&str> {
        self.models.get(&stage).map(|m| m.1.as_str())
    }
}

/// Normalises a stage list into execution order.
///
/// Either `UNET4` alone, or one initial network (`UNET1_NO_PA`, or `UNET1`
/// optionally followed by `REFINE_LABELS`) plus any of `UNET2_EXTRAPOLATE`
/// and `UNET3_PARCELLATE`. `FUSE` always closes the multi-stage path.
pub fn plan(stages: &[Stage]) -> Result<Vec<Stage>> {
    let mut seen = stages.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != stages.len() {
        return Err(Error::StageList("a stage is listed twice".into()));
    }
    let has = |s: Stage| stages.contains(&s);
    if has(Stage::Unet4) {
        if stages.len() > 1 {
            return Err(Error::StageList("UNET4 runs alone".into()));
        }
        return Ok(vec![Stage::Unet4]);
    }
    let base = match (has(Stage::Unet1), has(Stage::Unet1NoPa)) {
        (true, true) => return Err(Error::StageList("UNET1 and UNET1_NO_PA are alternatives".into())),
        (false, false) => return Err(Error::StageList("no initial segmentation stage".into())),
        (true, false) => Stage::Unet1,
        (false, true) => Stage::Unet1NoPa,
    };
    if has(Stage::RefineLabels) && base != Stage::Unet1 {
        return Err(Error::StageList("REFINE_LABELS follows UNET1 only".into()));
    }
    let mut out = vec![base];
    out.extend([Stage::RefineLabels, Stage::Unet2Extrapolate, Stage::Unet3Parcellate].into_iter().filter(|&s| has(s)));
    out.push(Stage::Fuse);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct InferenceResult {
    /// Final TEN map after cleanup.
    pub labels: LabelVolume,
    pub stages_run: Vec<Stage>,
    /// Output of every stage, on the heart window.
    pub intermediates: BTreeMap<Stage, LabelVolume>,
}

/// Runs `stages` on a prepared (heart-window) image. `annotations` supply
/// the valve plane for `REFINE_LABELS`; without them the PA stays in the RV.
pub fn run_inference(
    intensity: &IntensityVolume,
    stages: &[Stage],
    models: &ModelSet,
    grid: &GridConfig,
    annotations: Option<&Annotations>,
) -> Result<InferenceResult> {
    let order = plan(stages)?;
    for &s in order.iter().filter(|s| s.is_network()) {
        models.get(s)?;
    }
    let geometry = intensity.geometry();
    let mut inter = BTreeMap::new();

    let image = image_input(intensity);
    let segment = |stage: Stage, schema: LabelSchema| -> Result<LabelVolume> {
        let logits = models.get(stage)?.forward(&image)?;
        Ok(argmax_decode(&logits, geometry, schema)?)
    };

    if order == [Stage::Unet4] {
        let ten = segment(Stage::Unet4, LabelSchema::Ten).in_stage(Stage::Unet4)?;
        inter.insert(Stage::Unet4, ten.clone());
        return Ok(InferenceResult { labels: cleanup(&ten), stages_run: order, intermediates: inter });
    }

    let mut base = match order[0] {
        Stage::Unet1 => {
            let six = segment(Stage::Unet1, LabelSchema::Six).in_stage(Stage::Unet1)?;
            inter.insert(Stage::Unet1, six.clone());
            six
        }
        _ => {
            let b = segment(Stage::Unet1NoPa, LabelSchema::SixNoPaRefined).in_stage(Stage::Unet1NoPa)?;
            inter.insert(Stage::Unet1NoPa, b.clone());
            b
        }
    };
    if base.schema() == LabelSchema::Six {
        base = if order.contains(&Stage::RefineLabels) {
            let r = refine(intensity, &base, annotations).in_stage(Stage::RefineLabels)?;
            inter.insert(Stage::RefineLabels, r.clone());
            r
        } else {
            base.with_schema(LabelSchema::SixNoPaRefined)?
        };
    }

    let seven = if order.contains(&Stage::Unet2Extrapolate) {
        let s = extrapolate(models.get(Stage::Unet2Extrapolate)?, &base, intensity)
            .in_stage(Stage::Unet2Extrapolate)?;
        inter.insert(Stage::Unet2Extrapolate, s.clone());
        Some(s)
    } else {
        None
    };

    let parts = if order.contains(&Stage::Unet3Parcellate) {
        let p = parcellate(models.get(Stage::Unet3Parcellate)?, &base, grid).in_stage(Stage::Unet3Parcellate)?;
        if let Some(p) = &p {
            inter.insert(Stage::Unet3Parcellate, p.clone());
        }
        p
    } else {
        None
    };

    let fused = fuse_predictions(&base, seven.as_ref(), parts.as_ref()).in_stage(Stage::Fuse)?;
    let labels = cleanup(&fused);
    inter.insert(Stage::Fuse, labels.clone());
    Ok(InferenceResult { labels, stages_run: order, intermediates: inter })
}

/// Myocardium correction, then the RV/PA split when a plane is known.
/// Steps whose structures are missing from the prediction are skipped.
fn refine(intensity: &IntensityVolume, six: &LabelVolume, annotations: Option<&Annotations>) -> Result<LabelVolume> {
    let has = |s| six.count_structure(s) > 0;
    let six = if has(Structure::LV) && has(Structure::LVMyo) {
        lv_myo_reassign(intensity, six)?.labels
    } else {
        six.clone()
    };
    match annotations {
        Some(a) if six.count_structure(Structure::RV) > 0 => {
            let rv = LabelSchema::Six.require(Structure::RV)?;
            let pa = LabelSchema::Seven.require(Structure::PA)?;
            drop_pa(&split_by_plane(&six, rv, &a.plane, rv, pa, LabelSchema::Seven)?)
        }
        _ => Ok(six.with_schema(LabelSchema::SixNoPaRefined)?),
    }
}

fn extrapolate(model: &UNet<f32>, base: &LabelVolume, intensity: &IntensityVolume) -> Result<LabelVolume> {
    let with_image = model.config().in_channels == LabelSchema::SixNoPaRefined.num_channels() + 1;
    let input = label_input(base, with_image.then_some(intensity))?;
    Ok(argmax_decode(&model.forward(&input)?, base.geometry(), LabelSchema::Seven)?)
}

/// LA sub-labels pasted into an otherwise empty TEN map; `None` if the
/// base has no LA.
fn parcellate(model: &UNet<f32>, base: &LabelVolume, grid: &GridConfig) -> Result<Option<LabelVolume>> {
    let Some(w) = AtriumWindow::locate(base, grid.atrium_dims)? else {
        return Ok(None);
    };
    let logits = model.forward(&la_mask_input(&w.crop(base)?)?)?;
    let ten = parts_to_ten(&argmax_channels(&logits, 0));
    let g = base.geometry();
    let wg = cardiorefine_core::Geometry::isotropic(w.dims, 1.0)?;
    let mut data = vec![0u8; g.len()];
    for (i, &v) in ten.iter().enumerate() {
        if let Some([z, y, x]) = w.to_full(wg.coord(i), g.dims) {
            data[g.index(z, y, x)] = v;
        }
    }
    Ok(Some(LabelVolume::new(g.clone(), LabelSchema::Ten, data)?))
}

/// Keeps the largest 26-connected component of every single-object label.
pub fn cleanup(ten: &LabelVolume) -> LabelVolume {
    let ids: Vec<u8> = SINGLE_OBJECT.iter().filter_map(|&s| ten.schema().id_of(s)).collect();
    largest_component_cleanup(ten, &ids, Connectivity::Vertex26)
}
