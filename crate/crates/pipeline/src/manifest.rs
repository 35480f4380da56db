//! Manifest-driven batch inference with per-case provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cardiorefine_core::io::{load_intensity, load_labels, save_volume};
use cardiorefine_core::labels::Annotations;
use cardiorefine_core::metrics::dice_report;
use cardiorefine_core::{LabelSchema, Volume};
use serde::{Deserialize, Serialize};

use crate::dataset::Case;
use crate::error::{Error, Result};
use crate::inference::{run_inference, ModelSet};
use crate::prep::GridConfig;
use crate::stage::Stage;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseOrigin {
    Phantom,
    #[default]
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub intensity: PathBuf,
    #[serde(default)]
    pub labels: BTreeMap<LabelSchema, PathBuf>,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub provenance: CaseOrigin,
    #[serde(default)]
    pub group: Option<String>,
}

impl CaseRecord {
    /// Reads the image, the finest available reference labels and the
    /// annotations.
    pub fn load(&self) -> Result<Case> {
        let intensity = load_intensity(&self.intensity)?;
        let labels = [LabelSchema::Ten, LabelSchema::Seven, LabelSchema::Six, LabelSchema::SixNoPaRefined]
            .into_iter()
            .find_map(|s| self.labels.get(&s).map(|p| (s, p)))
            .map(|(s, p)| load_labels(p, Some(s)))
            .transpose()?;
        let annotations = self.annotations.as_ref().map(Annotations::load).transpose()?;
        Ok(Case { id: self.case_id.clone(), intensity, labels, annotations })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub models: BTreeMap<Stage, PathBuf>,
    pub cases: Vec<CaseRecord>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
}

impl PipelineManifest {
    /// Parses a manifest; relative paths are taken from its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: PipelineManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest { path: path.to_path_buf(), reason: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.output_dir);
        m.models.values_mut().for_each(fix);
        for c in &mut m.cases {
            fix(&mut c.intensity);
            c.labels.values_mut().for_each(fix);
            if let Some(a) = &mut c.annotations {
                fix(a);
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// What was done to one case, written next to its label map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub case_id: String,
    pub origin: CaseOrigin,
    pub stages_run: Vec<Stage>,
    /// SHA-256 of each model file.
    pub models: BTreeMap<Stage, String>,
    pub output: PathBuf,
    pub spacing_mm: f64,
    pub fov_iterations: usize,
    /// Per-label Dice against the reference, when one was given in TEN.
    pub dice: Option<BTreeMap<String, Option<f64>>>,
}

/// Runs every case of the manifest and writes `<case>_ten.nii.gz` and
/// `<case>_provenance.json` into the output directory.
pub fn run_pipeline(manifest: &PipelineManifest) -> Result<Vec<Provenance>> {
    let models = ModelSet::load(&manifest.models)?;
    run_pipeline_with(manifest, &models)
}

/// As [`run_pipeline`] with models already in memory.
pub fn run_pipeline_with(manifest: &PipelineManifest, models: &ModelSet) -> Result<Vec<Provenance>> {
    let dir = &manifest.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::with_capacity(manifest.cases.len());
    for record in &manifest.cases {
        let case = record.load()?;
        let (prepared, reference) = case.prepare_image(&manifest.grid)?;
        let result =
            run_inference(&prepared.intensity, &manifest.stages, models, &manifest.grid, case.annotations.as_ref())?;
        let output = dir.join(format!("{}_ten.nii.gz", record.case_id));
        save_volume(&result.labels, &output)?;
        let dice = match reference.filter(|r| r.schema() == LabelSchema::Ten) {
            Some(r) => {
                let rep = dice_report(&[(record.case_id.clone(), &result.labels, &r)], LabelSchema::Ten)?;
                Some(rep.labels.iter().map(|s| s.to_string()).zip(rep.cases[0].scores.iter().copied()).collect())
            }
            None => None,
        };
        let prov = Provenance {
            case_id: record.case_id.clone(),
            origin: record.provenance,
            models: result
                .stages_run
                .iter()
                .filter_map(|&s| models.hash(s).map(|h| (s, h.to_string())))
                .collect(),
            stages_run: result.stages_run,
            output,
            spacing_mm: prepared.transform.spacing,
            fov_iterations: prepared.transform.iterations,
            dice,
        };
        let ppath = dir.join(format!("{}_provenance.json", record.case_id));
        std::fs::write(&ppath, serde_json::to_string_pretty(&prov)?).map_err(|e| Error::io(&ppath, e))?;
        debug_assert!(result.labels.dims() == manifest.grid.heart_dims);
        out.push(prov);
    }
    Ok(out)
}
