use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{LabelSchema, Structure};
use crate::volume::{LabelVolume, Volume};

use super::mask::{BinaryMask, Connectivity, Neighborhood};

/// Oriented plane in physical `(z, y, x)` millimetres. The normal is kept
/// at unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRepr", into = "PlaneRepr")]
pub struct Plane {
    point: [f64; 3],
    normal: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct PlaneRepr {
    point: [f64; 3],
    normal: [f64; 3],
}

impl TryFrom<PlaneRepr> for Plane {
    type Error = Error;

    fn try_from(r: PlaneRepr) -> Result<Self> {
        Plane::new(r.point, r.normal)
    }
}

impl From<Plane> for PlaneRepr {
    fn from(p: Plane) -> Self {
        PlaneRepr {
            point: p.point,
            normal: p.normal,
        }
    }
}

impl Plane {
    pub fn new(point: [f64; 3], normal: [f64; 3]) -> Result<Self> {
        let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(len.is_finite() && len > 0.0) || point.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "degenerate plane normal {normal:?}"
            )));
        }
        Ok(Plane {
            point,
            normal: normal.map(|v| v / len),
        })
    }

    pub fn point(&self) -> [f64; 3] {
        self.point
    }

    pub fn normal(&self) -> [f64; 3] {
        self.normal
    }

    /// Signed distance in mm; positive on the side the normal points to.
    pub fn signed_distance(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|a| (p[a] - self.point[a]) * self.normal[a])
            .sum()
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            point: self.point,
            normal: self.normal.map(|v| -v),
        }
    }
}

/// Voxels of label `a` touching label `b`, together with voxels of `b`
/// touching `a`.
pub fn adjacency_band(
    labels: &LabelVolume,
    a: u8,
    b: u8,
    connectivity: Connectivity,
) -> BinaryMask {
    let hood = Neighborhood::new(labels.dims(), connectivity);
    let d = labels.data();
    let data = d
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let other = if v == a {
                b
            } else if v == b {
                a
            } else {
                return false;
            };
            hood.any(i, |n| d[n] == other)
        })
        .collect();
    BinaryMask::new(labels.dims(), data).expect("dims match")
}

/// The pulmonary valve band: RV voxels with a PA neighbour and PA voxels
/// with an RV neighbour.
pub fn extract_pav(labels: &LabelVolume, connectivity: Connectivity) -> Result<BinaryMask> {
    let rv = labels.schema().require(Structure::RV)?;
    let pa = labels.schema().require(Structure::PA)?;
    Ok(adjacency_band(labels, rv, pa, connectivity))
}

/// Splits `source_id` by a plane: voxel centres with non-negative signed
/// distance become `far_id`, the rest `near_id`. Other voxels keep their
/// IDs, which must all be valid in `target`.
pub fn split_by_plane(
    labels: &LabelVolume,
    source_id: u8,
    plane: &Plane,
    near_id: u8,
    far_id: u8,
    target: LabelSchema,
) -> Result<LabelVolume> {
    let g = labels.geometry();
    if !labels.data().contains(&source_id) {
        return Err(Error::InvalidArgument(format!(
            "label {source_id} is absent"
        )));
    }
    for id in [near_id, far_id] {
        if id > target.max_id() {
            return Err(Error::InvalidArgument(format!(
                "label {id} is not declared by {target}"
            )));
        }
    }
    let data = labels
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v != source_id {
                v
            } else if plane.signed_distance(g.physical(g.coord(i))) >= 0.0 {
                far_id
            } else {
                near_id
            }
        })
        .collect();
    LabelVolume::new(g.clone(), target, data)
}
