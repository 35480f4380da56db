use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{LabelSchema, Structure};
use crate::volume::{LabelVolume, Volume};

use super::valve::Plane;

/// Axis-aligned half-open voxel box assigning LA voxels to a sub-label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct CropBox {
    pub z: Range<usize>,
    pub y: Range<usize>,
    pub x: Range<usize>,
    pub label: Structure,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    range: [[usize; 2]; 3],
    label: Structure,
}

impl TryFrom<BoxRepr> for CropBox {
    type Error = Error;

    fn try_from(r: BoxRepr) -> Result<Self> {
        let [z, y, x] = r.range.map(|[a, b]| a..b);
        CropBox::new(z, y, x, r.label)
    }
}

impl From<CropBox> for BoxRepr {
    fn from(b: CropBox) -> Self {
        BoxRepr {
            range: [
                [b.z.start, b.z.end],
                [b.y.start, b.y.end],
                [b.x.start, b.x.end],
            ],
            label: b.label,
        }
    }
}

impl CropBox {
    pub fn new(
        z: Range<usize>,
        y: Range<usize>,
        x: Range<usize>,
        label: Structure,
    ) -> Result<Self> {
        if z.is_empty() || y.is_empty() || x.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "empty crop box {z:?} {y:?} {x:?}"
            )));
        }
        if !label.is_la_part() {
            return Err(Error::InvalidArgument(format!(
                "{label} is not a left-atrium part"
            )));
        }
        Ok(CropBox { z, y, x, label })
    }

    pub fn contains(&self, [z, y, x]: [usize; 3]) -> bool {
        self.z.contains(&z) && self.y.contains(&y) && self.x.contains(&x)
    }

    pub fn check_bounds(&self, dims: [usize; 3]) -> Result<()> {
        if self.z.end > dims[0] || self.y.end > dims[1] || self.x.end > dims[2] {
            return Err(Error::InvalidArgument(format!(
                "crop box {:?}x{:?}x{:?} exceeds dims {dims:?}",
                self.z, self.y, self.x
            )));
        }
        Ok(())
    }
}

/// Per-case annotation file: the valve plane and LA parcellation boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub case_id: String,
    pub plane: Plane,
    #[serde(default)]
    pub boxes: Vec<CropBox>,
}

impl Annotations {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Re-expresses a label map in the TEN schema, copying structures by name.
/// LA voxels (if the source has an LA) map to `la_default`.
pub(crate) fn to_ten(labels: &LabelVolume, la_default: Structure) -> Result<Vec<u8>> {
    let src = labels.schema();
    let mut table = vec![0u8; src.num_channels()];
    for (id, s) in src.entries() {
        let target = if s == Structure::LA { la_default } else { s };
        table[id as usize] = LabelSchema::Ten.require(target)?;
    }
    Ok(labels.data().iter().map(|&v| table[v as usize]).collect())
}

/// Partitions the left atrium: LA voxels inside a box take the box's
/// sub-label (later boxes win), the rest become LAbody. Returns a TEN map.
pub fn parcellate_la_boxes(labels: &LabelVolume, boxes: &[CropBox]) -> Result<LabelVolume> {
    let la = labels.schema().require(Structure::LA)?;
    let g = labels.geometry();
    for b in boxes {
        b.check_bounds(g.dims)?;
    }
    let mut data = to_ten(labels, Structure::LAbody)?;
    let ids: Vec<u8> = boxes
        .iter()
        .map(|b| LabelSchema::Ten.require(b.label))
        .collect::<Result<_>>()?;
    for (b, &id) in boxes.iter().zip(&ids) {
        for z in b.z.clone() {
            for y in b.y.clone() {
                for x in b.x.clone() {
                    let i = g.index(z, y, x);
                    if labels.data()[i] == la {
                        data[i] = id;
                    }
                }
            }
        }
    }
    LabelVolume::new(g.clone(), LabelSchema::Ten, data)
}
