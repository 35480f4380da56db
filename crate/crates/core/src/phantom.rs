//! Procedural whole-heart phantoms.
//!
//! Chambers are ellipsoids, vessels are capsules (line segments with a
//! radius). The geometry is laid out on a nominal 4 mm grid of 32x48x48
//! voxels and scaled into millimetres, so presets differ only in voxel
//! spacing and overall scale. The RV outflow and the PA are one capsule
//! split by the recorded valve plane; the atrium, its veins and its
//! appendage are one region split by the recorded boxes. Rebuilding the
//! TEN map from its SIX merge with those annotations is therefore exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{
    connected_components, dilate, largest_component_cleanup, Annotations, BinaryMask, Connectivity,
    CropBox, Plane,
};
use crate::schema::{LabelSchema, Structure, SINGLE_OBJECT};
use crate::volume::{Geometry, IntensityVolume, LabelVolume, Volume};

const LAYOUT_UNIT_MM: f64 = 4.0;
const LAYOUT_DIMS: [usize; 3] = [32, 48, 48];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.radii[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    fn grown(&self, by: f64) -> Ellipsoid {
        Ellipsoid {
            center: self.center,
            radii: self.radii.map(|r| r + by),
        }
    }
}

/// Segment from `start` to `end` swept by a sphere of `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub radius: f64,
}

impl Tube {
    fn contains(&self, p: [f64; 3]) -> bool {
        let d: [f64; 3] = std::array::from_fn(|a| self.end[a] - self.start[a]);
        let w: [f64; 3] = std::array::from_fn(|a| p[a] - self.start[a]);
        let len2: f64 = d.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            ((0..3).map(|a| w[a] * d[a]).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (0..3).map(|a| (w[a] - t * d[a]).powi(2)).sum::<f64>() <= self.radius * self.radius
    }
}

/// Physical axis-aligned box `[lo, hi)` in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub label: Structure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    pub background: f64,
    pub lv: f64,
    pub lv_myo: f64,
    pub rv: f64,
    pub ra: f64,
    pub aa: f64,
    pub pa: f64,
    pub la: f64,
    pub noise_sd: f64,
}

impl Default for IntensityModel {
    fn default() -> Self {
        // blood pools bright, myocardium darker
        IntensityModel {
            background: 0.0,
            lv: 420.0,
            lv_myo: 130.0,
            rv: 380.0,
            ra: 360.0,
            aa: 450.0,
            pa: 390.0,
            la: 400.0,
            noise_sd: 20.0,
        }
    }
}

impl IntensityModel {
    pub fn mean_of(&self, s: Structure) -> f64 {
        match s {
            Structure::LV => self.lv,
            Structure::LVMyo => self.lv_myo,
            Structure::RV => self.rv,
            Structure::RA => self.ra,
            Structure::AA => self.aa,
            Structure::PA => self.pa,
            Structure::LA
            | Structure::LAbody
            | Structure::LPV
            | Structure::RPV
            | Structure::LAA => self.la,
        }
    }
}

/// Geometry (in mm, `(z, y, x)`), grid and intensity model of one phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomParams {
    pub seed: u64,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub lv: Ellipsoid,
    pub myo_thickness: f64,
    pub rv: Ellipsoid,
    pub ra: Ellipsoid,
    pub la: Ellipsoid,
    pub laa: Ellipsoid,
    pub aa: Tube,
    pub pa: Tube,
    pub lpv: Vec<Tube>,
    pub rpv: Vec<Tube>,
    pub valve_plane: Plane,
    pub la_boxes: Vec<PhysicalBox>,
    pub intensity: IntensityModel,
}

fn ell(c: [f64; 3], r: [f64; 3]) -> Ellipsoid {
    Ellipsoid {
        center: c,
        radii: r,
    }
}

fn tube(a: [f64; 3], b: [f64; 3], r: f64) -> Tube {
    Tube {
        start: a,
        end: b,
        radius: r,
    }
}

impl PhantomParams {
    /// 32x48x48 voxels at 4 mm; the heart fits a 128x192x192 mm window.
    pub fn standard(seed: u64) -> Self {
        Self::build(seed, 1.0, LAYOUT_UNIT_MM, LAYOUT_DIMS)
    }

    /// A 25% larger heart at 5 mm whose extent exceeds 128 mm along z, so
    /// field-of-view fitting has to coarsen the grid.
    pub fn large(seed: u64) -> Self {
        Self::build(seed, 1.25, 5.0, LAYOUT_DIMS)
    }

    /// Standard anatomy sampled at another spacing.
    pub fn with_spacing(seed: u64, spacing: f64) -> Self {
        let dims =
            LAYOUT_DIMS.map(|d| ((d as f64 * LAYOUT_UNIT_MM / spacing).round() as usize).max(1));
        Self::build(seed, 1.0, spacing, dims)
    }

    fn build(seed: u64, scale: f64, spacing: f64, dims: [usize; 3]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = LAYOUT_UNIT_MM * scale;
        // common translation of the whole heart plus small per-part jitter
        let shift: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let mut jit = |amount: f64| -> f64 {
            if amount > 0.0 {
                rng.random_range(-amount..amount)
            } else {
                0.0
            }
        };
        let mut p = |v: [f64; 3], j: f64| -> [f64; 3] {
            let d = [jit(j), jit(j), jit(j)];
            std::array::from_fn(|a| (v[a] + shift[a] + d[a]) * unit)
        };
        let r = |v: [f64; 3], f: f64| -> [f64; 3] { v.map(|x| x * f * unit) };
        let f_lv =
            1.0 + 0.05 * (2.0 * ((seed.wrapping_mul(2654435761) % 1000) as f64 / 1000.0) - 1.0);

        let lv = ell(p([12.0, 26.0, 28.0], 0.3), r([6.0, 5.0, 5.0], f_lv));
        let rv = ell(p([12.0, 23.0, 14.5], 0.3), r([6.0, 5.5, 4.0], 1.0));
        let ra = ell(p([14.0, 34.0, 11.0], 0.3), r([4.5, 4.0, 4.0], 1.0));
        let la = ell(p([22.0, 36.0, 27.0], 0.3), r([4.0, 4.5, 6.0], 1.0));
        let laa = ell(p([23.0, 31.5, 31.5], 0.2), r([2.0, 2.0, 2.5], 1.0));

        let pa_start = p([15.0, 22.0, 15.0], 0.0);
        let pa_end = p([28.0, 20.0, 19.0], 0.4);
        let pa = tube(pa_start, pa_end, 2.5 * unit);
        let aa = tube(
            p([23.5, 28.0, 24.0], 0.0),
            p([30.0, 29.0, 23.0], 0.4),
            2.5 * unit,
        );

        let lpv = vec![
            tube(
                p([20.0, 38.0, 31.0], 0.0),
                p([18.0, 43.0, 40.0], 0.3),
                1.5 * unit,
            ),
            tube(
                p([24.5, 38.0, 31.0], 0.0),
                p([27.0, 43.0, 40.0], 0.3),
                1.5 * unit,
            ),
        ];
        let rpv = vec![
            tube(
                p([20.0, 38.0, 23.0], 0.0),
                p([18.0, 44.0, 16.0], 0.3),
                1.5 * unit,
            ),
            tube(
                p([24.5, 38.0, 23.0], 0.0),
                p([27.0, 44.0, 16.0], 0.3),
                1.5 * unit,
            ),
        ];

        // valve plane across the outflow capsule, normal along its axis
        let axis: [f64; 3] = std::array::from_fn(|a| pa.end[a] - pa.start[a]);
        let z_cut = (19.5 + shift[0]) * unit;
        let t = (z_cut - pa.start[0]) / axis[0];
        let point: [f64; 3] = std::array::from_fn(|a| pa.start[a] + t * axis[a]);
        let valve_plane = Plane::new(point, axis).expect("non-degenerate outflow axis");

        let bx = |lo: [f64; 3], hi: [f64; 3], label| PhysicalBox {
            lo: std::array::from_fn(|a| (lo[a] + shift[a]) * unit),
            hi: std::array::from_fn(|a| (hi[a] + shift[a]) * unit),
            label,
        };
        let la_boxes = vec![
            bx([14.0, 36.0, 32.5], [32.0, 48.0, 48.0], Structure::LPV),
            bx([14.0, 36.0, 0.0], [32.0, 48.0, 21.5], Structure::RPV),
            bx([19.0, 26.0, 30.5], [29.0, 34.0, 48.0], Structure::LAA),
        ];

        PhantomParams {
            seed,
            dims,
            spacing,
            lv,
            myo_thickness: 3.0 * unit,
            rv,
            ra,
            la,
            laa,
            aa,
            pa,
            lpv,
            rpv,
            valve_plane,
            la_boxes,
            intensity: IntensityModel::default(),
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::isotropic(self.dims, self.spacing)
    }

    /// Voxel-index boxes selecting voxel centres inside each physical box.
    pub fn crop_boxes(&self) -> Result<Vec<CropBox>> {
        let g = self.geometry()?;
        self.la_boxes
            .iter()
            .map(|b| {
                let range = |a: usize| {
                    let lo = (b.lo[a] / g.spacing[a]).ceil().max(0.0) as usize;
                    let hi = ((b.hi[a] / g.spacing[a]).ceil().max(0.0) as usize).min(g.dims[a]);
                    lo..hi.max(lo)
                };
                CropBox::new(range(0), range(1), range(2), b.label)
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::PhantomRejected(format!("non-positive {what}")));
        let ells = [&self.lv, &self.rv, &self.ra, &self.la, &self.laa];
        if ells.iter().any(|e| e.radii.iter().any(|&r| !(r > 0.0))) {
            return bad("ellipsoid radius");
        }
        let tubes = [&self.aa, &self.pa]
            .into_iter()
            .chain(&self.lpv)
            .chain(&self.rpv);
        if tubes.into_iter().any(|t| !(t.radius > 0.0)) {
            return bad("tube radius");
        }
        if !(self.myo_thickness > 0.0) {
            return bad("myocardial thickness");
        }
        if !(self.spacing > 0.0) || self.dims.contains(&0) {
            return bad("grid");
        }
        Ok(())
    }
}

/// A generated case: image, native TEN labels and the annotations used to
/// build them.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub intensity: IntensityVolume,
    pub labels: LabelVolume,
    pub annotations: Annotations,
}

const MIN_VEIN_FRAGMENT: usize = 8;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Group {
    Lv,
    Rv,
    La,
    Ra,
    Aa,
}

/// Rasterises the TEN label map. Fails if two chamber groups claim the same
/// voxel.
pub fn rasterize_labels(params: &PhantomParams) -> Result<LabelVolume> {
    params.validate()?;
    let g = params.geometry()?;
    let ten = LabelSchema::Ten;
    let id = |s| ten.id_of(s).unwrap();
    let myo_outer = params.lv.grown(params.myo_thickness);
    let boxes = params.crop_boxes()?;

    let mut data = vec![0u8; g.len()];
    for (i, slot) in data.iter_mut().enumerate() {
        let c = g.coord(i);
        let p = g.physical(c);
        let mut claims: Vec<Group> = Vec::with_capacity(2);
        if myo_outer.contains(p) {
            claims.push(Group::Lv);
        }
        if params.rv.contains(p) || params.pa.contains(p) {
            claims.push(Group::Rv);
        }
        if params.la.contains(p)
            || params.laa.contains(p)
            || params.lpv.iter().chain(&params.rpv).any(|t| t.contains(p))
        {
            claims.push(Group::La);
        }
        if params.ra.contains(p) {
            claims.push(Group::Ra);
        }
        if params.aa.contains(p) {
            claims.push(Group::Aa);
        }
        if claims.len() > 1 {
            return Err(Error::PhantomRejected(format!(
                "structures {claims:?} overlap at voxel {c:?}"
            )));
        }
        *slot = match claims.first() {
            None => 0,
            Some(Group::Lv) => id(if params.lv.contains(p) {
                Structure::LV
            } else {
                Structure::LVMyo
            }),
            Some(Group::Rv) => {
                if params.valve_plane.signed_distance(p) >= 0.0 {
                    id(Structure::PA)
                } else {
                    id(Structure::RV)
                }
            }
            Some(Group::La) => {
                let part = boxes
                    .iter()
                    .rev()
                    .find(|b| b.contains(c))
                    .map_or(Structure::LAbody, |b| b.label);
                id(part)
            }
            Some(Group::Ra) => id(Structure::RA),
            Some(Group::Aa) => id(Structure::AA),
        };
    }
    let labels = LabelVolume::new(g, ten, data)?;

    // box edges can orphan slivers of the atrial region; clear them
    let cleaned = largest_component_cleanup(
        &labels,
        &[id(Structure::LAbody), id(Structure::LAA)],
        Connectivity::Vertex26,
    );
    let mut data = cleaned.into_data();
    for vein in [Structure::LPV, Structure::RPV] {
        let mask = BinaryMask::new(labels.dims(), data.iter().map(|&v| v == id(vein)).collect())?;
        let comps = connected_components(&mask, Connectivity::Vertex26);
        for (i, &c) in comps.labels.iter().enumerate() {
            if c > 0 && comps.sizes[c as usize - 1] < MIN_VEIN_FRAGMENT {
                data[i] = 0;
            }
        }
    }
    LabelVolume::new(labels.geometry().clone(), ten, data)
}

pub fn generate_phantom(params: &PhantomParams) -> Result<Phantom> {
    let labels = rasterize_labels(params)?;
    let ten = LabelSchema::Ten;
    let id = |s| ten.id_of(s).unwrap();
    for s in SINGLE_OBJECT {
        let mask = BinaryMask::from_label(&labels, id(s));
        let n = connected_components(&mask, Connectivity::Vertex26).len();
        if n != 1 {
            return Err(Error::PhantomRejected(format!("{s} has {n} components")));
        }
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x005E_ED0F_CA5E);
    let noise = Normal::new(0.0, params.intensity.noise_sd)
        .map_err(|e| Error::PhantomRejected(format!("noise model: {e}")))?;
    let image: Vec<f32> = labels
        .data()
        .iter()
        .map(|&l| {
            let mean = ten
                .structure_of(l)
                .map_or(params.intensity.background, |s| params.intensity.mean_of(s));
            (mean + noise.sample(&mut noise_rng)) as f32
        })
        .collect();
    let intensity = IntensityVolume::new(labels.geometry().clone(), image)?;

    Ok(Phantom {
        intensity,
        labels,
        annotations: Annotations {
            case_id: format!("phantom-{}", params.seed),
            plane: params.valve_plane.clone(),
            boxes: params.crop_boxes()?,
        },
    })
}

/// Synthetic segmentation defects.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DegradeMode {
    /// The inner `magnitude` myocardial layers are relabelled LV.
    LvOversegment,
    /// PA is merged into RV (any positive magnitude).
    PaIntoRv,
    /// The superior `magnitude` fraction of slices is cleared.
    FovCrop,
}

/// Deterministically corrupts a label map.
pub fn degrade_labels(
    labels: &LabelVolume,
    mode: DegradeMode,
    magnitude: f64,
) -> Result<LabelVolume> {
    if !(magnitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "magnitude {magnitude} must be non-negative"
        )));
    }
    if magnitude == 0.0 {
        return Ok(labels.clone());
    }
    let schema = labels.schema();
    let mut data = labels.data().to_vec();
    match mode {
        DegradeMode::LvOversegment => {
            let lv = schema.require(Structure::LV)?;
            let myo = schema.require(Structure::LVMyo)?;
            if magnitude.fract() != 0.0 {
                return Err(Error::InvalidArgument(
                    "layer count must be an integer".into(),
                ));
            }
            let dims = labels.dims();
            for _ in 0..magnitude as usize {
                let lv_mask = BinaryMask::new(dims, data.iter().map(|&v| v == lv).collect())?;
                let grown = dilate(&lv_mask, Connectivity::Face6, 1);
                let layer: Vec<usize> = grown.indices().filter(|&i| data[i] == myo).collect();
                for &i in &layer {
                    data[i] = lv;
                }
            }
            // the wall must survive: no LV voxel may touch anything but LV/LVMyo
            let lv_mask = BinaryMask::new(dims, data.iter().map(|&v| v == lv).collect())?;
            let grown = dilate(&lv_mask, Connectivity::Face6, 1);
            if grown.indices().any(|i| data[i] != lv && data[i] != myo) || !data.contains(&myo) {
                return Err(Error::InvalidArgument(format!(
                    "{magnitude} layers exceed the myocardial wall thickness"
                )));
            }
        }
        DegradeMode::PaIntoRv => {
            let rv = schema.require(Structure::RV)?;
            let pa = schema.require(Structure::PA)?;
            for v in data.iter_mut().filter(|v| **v == pa) {
                *v = rv;
            }
        }
        DegradeMode::FovCrop => {
            if magnitude >= 1.0 {
                return Err(Error::InvalidArgument(
                    "crop fraction must be below 1".into(),
                ));
            }
            let [nz, ny, nx] = labels.dims();
            let cut = (magnitude * nz as f64).floor() as usize;
            for v in &mut data[(nz - cut) * ny * nx..] {
                *v = 0;
            }
        }
    }
    LabelVolume::new(labels.geometry().clone(), schema, data)
}
