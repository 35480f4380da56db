use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cardiorefine_core::io::{load_intensity, load_labels, save_volume};
use cardiorefine_core::labels::{
    extract_pav, fuse_predictions, lv_myo_reassign, parcellate_la_boxes, split_by_plane, Annotations, Connectivity,
};
use cardiorefine_core::metrics::dice_report;
use cardiorefine_core::phantom::{degrade_labels, generate_phantom, DegradeMode, PhantomParams};
use cardiorefine_core::{LabelSchema, LabelVolume, Structure, Volume};
use cardiorefine_pipeline::inference::cleanup;
use cardiorefine_pipeline::manifest::CaseOrigin;
use cardiorefine_pipeline::{
    run_inference, run_pipeline, train_stage, Case, CaseRecord, GridConfig, ModelSet, PipelineManifest, Split, Stage,
    StageTrainingConfig,
};
use cardiorefine_unet::save_weights;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Marks an error as a usage problem (exit code 1).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "cardiorefine", version, about = "Whole-heart CT label refinement")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resample to an isotropic grid and crop or pad to a window around the heart.
    Preprocess(PreprocessArgs),
    /// Move over-segmented LV voxels back into the myocardium.
    RefineLv(RefineArgs),
    /// Write the pulmonary valve band (RV/PA adjacency) as a label map.
    ExtractPav(PavArgs),
    /// Split the RV at the annotated valve plane into RV and PA.
    SplitPlane(SplitArgs),
    /// Partition the LA with annotation boxes.
    Parcellate(ParcellateArgs),
    /// Combine stage predictions into one TEN map.
    Fuse(FuseArgs),
    /// Keep the largest component of every single-object label.
    Cleanup(CleanupArgs),
    /// Per-label Dice between predictions and references.
    Dice(DiceArgs),
    /// Train one stage network.
    Train(TrainArgs),
    /// Run stage networks on one image.
    Infer(InferArgs),
    /// Run a pipeline manifest.
    Pipeline(PipelineArgs),
    /// Generate synthetic cases.
    Phantom(PhantomArgs),
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out_image: PathBuf,
    #[arg(long, requires = "labels")]
    out_labels: Option<PathBuf>,
    /// Target spacing in mm.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Window as Z,Y,X.
    #[arg(long, value_delimiter = ',', default_values_t = [128, 192, 192])]
    dims: Vec<usize>,
}

#[derive(Args, Debug)]
struct RefineArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PavArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "FACE6")]
    connectivity: Connectivity,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ParcellateArgs {
    /// SEVEN map.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// SIX_NO_PA_REFINED map.
    #[arg(long)]
    base: PathBuf,
    /// SEVEN map with the PA.
    #[arg(long)]
    extrapolated: Option<PathBuf>,
    /// TEN map with LA parts.
    #[arg(long)]
    parcellated: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_cleanup: bool,
}

#[derive(Args, Debug)]
struct CleanupArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "VERTEX26")]
    connectivity: Connectivity,
}

#[derive(Args, Debug)]
struct DiceArgs {
    #[arg(long, num_args = 1.., required = true)]
    pred: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    reference: Vec<PathBuf>,
    /// Read both sides as this schema instead of the stored one.
    #[arg(long)]
    schema: Option<LabelSchema>,
    /// Also write per-case scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training configuration JSON (stage, width_scale, lr, steps, ...).
    #[arg(long)]
    config: PathBuf,
    /// Manifest providing the cases and the working grid.
    #[arg(long)]
    manifest: PathBuf,
    /// Split JSON; by default cases are split 200:30:30 with the seed.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Loss history as JSON.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    image: PathBuf,
    /// Comma-separated stage names.
    #[arg(long, value_delimiter = ',', required = true)]
    stages: Vec<Stage>,
    /// STAGE=PATH, repeatable.
    #[arg(long = "model", value_parser = parse_model)]
    models: Vec<(Stage, PathBuf)>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [128, 192, 192])]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [128, 128, 128])]
    atrium_dims: Vec<usize>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Preset {
    Standard,
    Large,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Defect {
    LvOversegment,
    PaIntoRv,
    FovCrop,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, value_enum, default_value = "standard")]
    preset: Preset,
    /// Also write a degraded copy of the labels.
    #[arg(long, value_enum, requires = "magnitude")]
    degrade: Option<Defect>,
    #[arg(long)]
    magnitude: Option<f64>,
}

fn parse_model(s: &str) -> Result<(Stage, PathBuf), String> {
    let (stage, path) = s.split_once('=').ok_or_else(|| format!("expected STAGE=PATH, got `{s}`"))?;
    Ok((stage.parse()?, PathBuf::from(path)))
}

fn dims3(v: &[usize], flag: &str) -> Result<[usize; 3]> {
    <[usize; 3]>::try_from(v).map_err(|_| usage(format!("--{flag} needs three values, got {}", v.len())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_labels(v: &LabelVolume, path: &Path) -> Result<()> {
    save_volume(v, path).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::RefineLv(a) => {
            let img = load_intensity(&a.image)?;
            let lab = load_labels(&a.labels, None)?;
            let out = lv_myo_reassign(&img, &lab)?;
            write_labels(&out.labels, &a.out)?;
            println!("moved {} voxels in {} passes", out.transferred, out.iterations);
            Ok(())
        }
        Command::ExtractPav(a) => {
            let lab = load_labels(&a.labels, None)?;
            let band = extract_pav(&lab, a.connectivity)?;
            let data = lab.data().iter().zip(band.data()).map(|(&v, &b)| if b { v } else { 0 }).collect();
            write_labels(&LabelVolume::new(lab.geometry().clone(), lab.schema(), data)?, &a.out)?;
            println!("{} valve voxels", band.count());
            Ok(())
        }
        Command::SplitPlane(a) => {
            let lab = load_labels(&a.labels, None)?;
            let ann = Annotations::load(&a.annotations)?;
            let rv = lab.schema().require(Structure::RV)?;
            let seven = LabelSchema::Seven;
            let out = split_by_plane(
                &lab,
                rv,
                &ann.plane,
                seven.require(Structure::RV)?,
                seven.require(Structure::PA)?,
                seven,
            )?;
            write_labels(&out, &a.out)
        }
        Command::Parcellate(a) => {
            let lab = load_labels(&a.labels, None)?;
            let ann = Annotations::load(&a.annotations)?;
            write_labels(&parcellate_la_boxes(&lab, &ann.boxes)?, &a.out)
        }
        Command::Fuse(a) => {
            let base = load_labels(&a.base, None)?;
            let e = a.extrapolated.as_ref().map(|p| load_labels(p, None)).transpose()?;
            let p = a.parcellated.as_ref().map(|p| load_labels(p, None)).transpose()?;
            let fused = fuse_predictions(&base, e.as_ref(), p.as_ref())?;
            write_labels(&if a.no_cleanup { fused } else { cleanup(&fused) }, &a.out)
        }
        Command::Cleanup(a) => {
            let lab = load_labels(&a.labels, None)?;
            let ids: Vec<u8> =
                cardiorefine_core::SINGLE_OBJECT.iter().filter_map(|&s| lab.schema().id_of(s)).collect();
            let out = cardiorefine_core::labels::largest_component_cleanup(&lab, &ids, a.connectivity);
            write_labels(&out, &a.out)
        }
        Command::Dice(a) => dice(a),
        Command::Train(a) => train(a),
        Command::Infer(a) => infer(a),
        Command::Pipeline(a) => {
            let m = PipelineManifest::load(&a.manifest)?;
            for p in run_pipeline(&m)? {
                let mean = p.dice.as_ref().map(|d| {
                    let v: Vec<f64> = d.values().flatten().copied().collect();
                    v.iter().sum::<f64>() / v.len().max(1) as f64
                });
                match mean {
                    Some(m) => println!("{}\t{}\tmean dice {:.3}", p.case_id, p.output.display(), m),
                    None => println!("{}\t{}", p.case_id, p.output.display()),
                }
            }
            Ok(())
        }
        Command::Phantom(a) => phantom(a),
    }
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let grid = GridConfig { spacing: a.spacing, heart_dims: dims3(&a.dims, "dims")?, ..GridConfig::default() };
    let img = load_intensity(&a.image)?;
    let lab = a.labels.as_ref().map(|p| load_labels(p, None)).transpose()?;
    let t = match &lab {
        Some(l) => cardiorefine_pipeline::prep::fit_transform(&img, l, &grid)?,
        None => cardiorefine_pipeline::prep::centered_transform(&img, &grid)?,
    };
    save_volume(&t.apply(&img)?, &a.out_image)?;
    if let (Some(l), Some(out)) = (&lab, &a.out_labels) {
        write_labels(&t.apply(l)?, out)?;
    }
    println!("spacing {:.4} mm after {} coarsening steps", t.spacing, t.iterations);
    Ok(())
}

fn dice(a: DiceArgs) -> Result<()> {
    if a.pred.len() != a.reference.len() {
        return Err(usage(format!("{} predictions but {} references", a.pred.len(), a.reference.len())));
    }
    let mut pairs = Vec::new();
    for (p, r) in a.pred.iter().zip(&a.reference) {
        let id = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        pairs.push((id, load_labels(p, a.schema)?, load_labels(r, a.schema)?));
    }
    let schema = pairs[0].2.schema();
    let refs: Vec<_> = pairs.iter().map(|(id, p, r)| (id.clone(), p, r)).collect();
    let rep = dice_report(&refs, schema)?;
    print!("{}", rep.to_table());
    if let Some(csv) = &a.csv {
        std::fs::write(csv, rep.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: StageTrainingConfig = read_json(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if !cfg.stage.is_network() {
        return Err(usage(format!("{} has no network to train", cfg.stage)));
    }
    let m = PipelineManifest::load(&a.manifest)?;
    let mut cases = Vec::new();
    for r in &m.cases {
        cases.push(r.load()?.prepare(&m.grid)?);
    }
    let ids: Vec<String> = cases.iter().map(|c| c.id.clone()).collect();
    let split = match &a.split {
        Some(p) => read_json(p)?,
        None => Split::by_ratio(&ids, Split::DEFAULT_RATIOS, cfg.seed)?,
    };
    let out = train_stage(&cfg, &cases, &split, &m.grid)?;
    save_weights(&out.model, &a.out)?;
    if let Some(h) = &a.history {
        std::fs::write(h, serde_json::to_string(&out.history)?).with_context(|| format!("writing {}", h.display()))?;
    }
    let (first, last) = (out.history[0], out.history[out.history.len() - 1]);
    println!("{}: loss {first:.4} -> {last:.4} over {} steps", cfg.stage, out.history.len());
    if let Some(step) = out.best_step {
        println!("kept checkpoint from step {step}");
    }
    if let Some(rep) = out.test_report {
        print!("{}", rep.to_table());
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let grid = GridConfig {
        spacing: a.spacing,
        heart_dims: dims3(&a.dims, "dims")?,
        atrium_dims: dims3(&a.atrium_dims, "atrium-dims")?,
    };
    cardiorefine_pipeline::plan(&a.stages).map_err(|e| usage(e.to_string()))?;
    let paths: BTreeMap<Stage, PathBuf> = a.models.into_iter().collect();
    let models = ModelSet::load(&paths)?;
    let case = Case { id: "case".into(), intensity: load_intensity(&a.image)?, labels: None, annotations: None };
    let (prepared, _) = case.prepare_image(&grid)?;
    let ann = a.annotations.as_ref().map(Annotations::load).transpose()?;
    let r = run_inference(&prepared.intensity, &a.stages, &models, &grid, ann.as_ref())?;
    write_labels(&r.labels, &a.out)?;
    let names: Vec<&str> = r.stages_run.iter().map(|s| s.name()).collect();
    println!("ran {}", names.join(" -> "));
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut records = Vec::new();
    for seed in a.seed..a.seed + a.count {
        let params = match a.preset {
            Preset::Standard => PhantomParams::standard(seed),
            Preset::Large => PhantomParams::large(seed),
        };
        let ph = generate_phantom(&params)?;
        let id = format!("phantom{seed:04}");
        let image = a.out_dir.join(format!("{id}_image.nii.gz"));
        let ten = a.out_dir.join(format!("{id}_ten.nii.gz"));
        let ann = a.out_dir.join(format!("{id}_annotations.json"));
        save_volume(&ph.intensity, &image)?;
        write_labels(&ph.labels, &ten)?;
        ph.annotations.save(&ann)?;
        if let (Some(d), Some(m)) = (a.degrade, a.magnitude) {
            let mode = match d {
                Defect::LvOversegment => DegradeMode::LvOversegment,
                Defect::PaIntoRv => DegradeMode::PaIntoRv,
                Defect::FovCrop => DegradeMode::FovCrop,
            };
            write_labels(&degrade_labels(&ph.labels, mode, m)?, &a.out_dir.join(format!("{id}_degraded.nii.gz")))?;
        }
        records.push(CaseRecord {
            case_id: id,
            intensity: image,
            labels: BTreeMap::from([(LabelSchema::Ten, ten)]),
            annotations: Some(ann),
            provenance: CaseOrigin::Phantom,
            group: None,
        });
    }
    let list = a.out_dir.join("cases.json");
    std::fs::write(&list, serde_json::to_string_pretty(&records)?).with_context(|| format!("writing {}", list.display()))?;
    println!("{} phantoms in {}", records.len(), a.out_dir.display());
    Ok(())
}
