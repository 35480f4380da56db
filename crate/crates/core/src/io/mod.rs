//! Volume file I/O.
//!
//! Two formats are supported, chosen by file extension:
//!
//! * NIfTI-1 single files (`.nii`, or gzip-compressed `.nii.gz`),
//!   little-endian, datatypes uint8, int16 and float32.
//! * A raw format (`.raw`): a flat little-endian float32 (intensity) or
//!   uint8 (label) array with a JSON sidecar of the same stem holding
//!   `{dims, spacing, origin, kind, schema}`.
//!
//! NIfTI axes `(i, j, k)` map to `(x, y, z)`; the in-memory order is
//! `(z, y, x)` as everywhere else in this crate.

mod nifti;
mod raw;

use std::path::Path;

use crate::error::{Error, Result};
use crate::schema::LabelSchema;
use crate::volume::{IntensityVolume, LabelVolume};

pub use nifti::{read_nifti, write_nifti, NiftiData, NiftiValues};
pub use raw::{RawHeader, RawKind};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Nifti { gzip: bool },
    Raw,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        if name.ends_with(".nii.gz") {
            Ok(FileFormat::Nifti { gzip: true })
        } else if name.ends_with(".nii") {
            Ok(FileFormat::Nifti { gzip: false })
        } else if name.ends_with(".raw") {
            Ok(FileFormat::Raw)
        } else {
            Err(Error::format(
                path,
                "unrecognised extension (expected .nii, .nii.gz or .raw)",
            ))
        }
    }
}

/// What to interpret a file as. A label schema of `None` means "use the
/// schema recorded in the file".
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VolumeKind {
    Intensity,
    Label(Option<LabelSchema>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedVolume {
    Intensity(IntensityVolume),
    Label(LabelVolume),
}

pub fn load_volume(path: impl AsRef<Path>, kind: VolumeKind) -> Result<LoadedVolume> {
    let path = path.as_ref();
    match kind {
        VolumeKind::Intensity => load_intensity(path).map(LoadedVolume::Intensity),
        VolumeKind::Label(schema) => load_labels(path, schema).map(LoadedVolume::Label),
    }
}

pub fn load_intensity(path: impl AsRef<Path>) -> Result<IntensityVolume> {
    let path = path.as_ref();
    match FileFormat::from_path(path)? {
        FileFormat::Nifti { .. } => read_nifti(path)?.into_intensity(),
        FileFormat::Raw => raw::load_intensity(path),
    }
}

pub fn load_labels(path: impl AsRef<Path>, schema: Option<LabelSchema>) -> Result<LabelVolume> {
    let path = path.as_ref();
    match FileFormat::from_path(path)? {
        FileFormat::Nifti { .. } => read_nifti(path)?.into_labels(path, schema),
        FileFormat::Raw => raw::load_labels(path, schema),
    }
}

/// Volumes that can be written to disk.
pub trait VolumeFile {
    fn save(&self, path: &Path) -> Result<()>;
}

impl VolumeFile for IntensityVolume {
    fn save(&self, path: &Path) -> Result<()> {
        match FileFormat::from_path(path)? {
            FileFormat::Nifti { gzip } => write_nifti(path, &NiftiData::from_intensity(self), gzip),
            FileFormat::Raw => raw::save_intensity(self, path),
        }
    }
}

impl VolumeFile for LabelVolume {
    fn save(&self, path: &Path) -> Result<()> {
        match FileFormat::from_path(path)? {
            FileFormat::Nifti { gzip } => write_nifti(path, &NiftiData::from_labels(self), gzip),
            FileFormat::Raw => raw::save_labels(self, path),
        }
    }
}

impl VolumeFile for LoadedVolume {
    fn save(&self, path: &Path) -> Result<()> {
        match self {
            LoadedVolume::Intensity(v) => v.save(path),
            LoadedVolume::Label(v) => v.save(path),
        }
    }
}

pub fn save_volume<V: VolumeFile + ?Sized>(vol: &V, path: impl AsRef<Path>) -> Result<()> {
    vol.save(path.as_ref())
}

/// Converts stored numeric values to label IDs, rejecting negative,
/// fractional or out-of-schema values.
pub(crate) fn values_to_labels(values: impl Iterator<Item = f64>, max_id: u8) -> Result<Vec<u8>> {
    values
        .enumerate()
        .map(|(index, v)| {
            if v.fract() != 0.0 || v < 0.0 || v > max_id as f64 || !v.is_finite() {
                Err(Error::InvalidLabel { value: v, index })
            } else {
                Ok(v as u8)
            }
        })
        .collect()
}
