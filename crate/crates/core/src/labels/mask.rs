use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

/// Voxel neighbourhood: shared face, shared edge or shared vertex.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Connectivity {
    Face6,
    Edge18,
    Vertex26,
}

impl Connectivity {
    /// Neighbour offsets `(dz, dy, dx)` in lexicographic order.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let max_nonzero = match self {
            Connectivity::Face6 => 1,
            Connectivity::Edge18 => 2,
            Connectivity::Vertex26 => 3,
        };
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nz = [dz, dy, dx].iter().filter(|&&d| d != 0).count();
                    if nz > 0 && nz <= max_nonzero {
                        out.push([dz, dy, dx]);
                    }
                }
            }
        }
        out
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "6" | "face6" | "face" => Ok(Connectivity::Face6),
            "18" | "edge18" | "edge" => Ok(Connectivity::Edge18),
            "26" | "vertex26" | "vertex" => Ok(Connectivity::Vertex26),
            _ => Err(Error::InvalidArgument(format!(
                "unknown connectivity '{s}'"
            ))),
        }
    }
}

/// Precomputed in-bounds neighbour lookup for one grid shape.
#[derive(Clone, Debug)]
pub(crate) struct Neighborhood {
    dims: [usize; 3],
    offsets: Vec<[isize; 3]>,
}

impl Neighborhood {
    pub(crate) fn new(dims: [usize; 3], connectivity: Connectivity) -> Self {
        Neighborhood {
            dims,
            offsets: connectivity.offsets(),
        }
    }

    /// Calls `f` with the linear index of every in-bounds neighbour.
    #[inline]
    pub(crate) fn for_each(&self, index: usize, mut f: impl FnMut(usize)) {
        let [nz, ny, nx] = self.dims;
        let x = (index % nx) as isize;
        let y = ((index / nx) % ny) as isize;
        let z = (index / (nx * ny)) as isize;
        for &[dz, dy, dx] in &self.offsets {
            let (zz, yy, xx) = (z + dz, y + dy, x + dx);
            if zz < 0
                || yy < 0
                || xx < 0
                || zz >= nz as isize
                || yy >= ny as isize
                || xx >= nx as isize
            {
                continue;
            }
            f((zz as usize * ny + yy as usize) * nx + xx as usize);
        }
    }

    #[inline]
    pub(crate) fn any(&self, index: usize, mut pred: impl FnMut(usize) -> bool) -> bool {
        let mut hit = false;
        self.for_each(index, |n| hit = hit || pred(n));
        hit
    }
}

/// One boolean per voxel of a parent grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    dims: [usize; 3],
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(dims: [usize; 3], data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidArgument(format!(
                "mask of {} voxels does not match dims {dims:?}",
                data.len()
            )));
        }
        Ok(BinaryMask { dims, data })
    }

    pub fn empty(dims: [usize; 3]) -> Self {
        BinaryMask {
            dims,
            data: vec![false; dims.iter().product()],
        }
    }

    /// Voxels of `labels` equal to `id`.
    pub fn from_label(labels: &LabelVolume, id: u8) -> Self {
        use crate::volume::Volume;
        BinaryMask {
            dims: labels.dims(),
            data: labels.data().iter().map(|&v| v == id).collect(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.data[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.data[index] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn none(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert_eq!(self.dims, other.dims);
        BinaryMask {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert_eq!(self.dims, other.dims);
        BinaryMask {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}
