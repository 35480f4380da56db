use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::LabelSchema;
use crate::volume::{Geometry, IntensityVolume, LabelVolume, Volume};

use super::values_to_labels;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawKind {
    /// little-endian float32 payload
    Intensity,
    /// uint8 payload
    Label,
}

/// JSON sidecar describing a `.raw` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: [usize; 3],
    #[serde(with = "spacing_repr")]
    pub spacing: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
    pub kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<LabelSchema>,
}

/// Spacing may be written as a single number (isotropic) or a triple.
mod spacing_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Scalar(f64),
        Triple([f64; 3]),
    }

    pub fn serialize<S: Serializer>(v: &[f64; 3], s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 3], D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Scalar(s) => [s; 3],
            Repr::Triple(t) => t,
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn read_header(path: &Path) -> Result<(RawHeader, Geometry, Vec<u8>)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let header: RawHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    let geometry = Geometry::new(header.dims, header.spacing, header.origin)
        .map_err(|e| Error::format(&side, e.to_string()))?;
    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    let elem = match header.kind {
        RawKind::Intensity => 4,
        RawKind::Label => 1,
    };
    if payload.len() != geometry.len() * elem {
        return Err(Error::format(
            path,
            format!(
                "payload has {} bytes, header implies {}",
                payload.len(),
                geometry.len() * elem
            ),
        ));
    }
    Ok((header, geometry, payload))
}

fn decode_f32(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

pub(super) fn load_intensity(path: &Path) -> Result<IntensityVolume> {
    let (header, geometry, payload) = read_header(path)?;
    let data = match header.kind {
        RawKind::Intensity => decode_f32(&payload),
        RawKind::Label => payload.iter().map(|&v| v as f32).collect(),
    };
    IntensityVolume::new(geometry, data)
}

pub(super) fn load_labels(path: &Path, schema: Option<LabelSchema>) -> Result<LabelVolume> {
    let (header, geometry, payload) = read_header(path)?;
    let schema = schema
        .or(header.schema)
        .ok_or_else(|| Error::format(path, "label schema neither given nor recorded in sidecar"))?;
    let data = match header.kind {
        RawKind::Label => values_to_labels(payload.iter().map(|&v| v as f64), schema.max_id())?,
        RawKind::Intensity => values_to_labels(
            decode_f32(&payload).into_iter().map(f64::from),
            schema.max_id(),
        )?,
    };
    LabelVolume::new(geometry, schema, data)
}

fn write(path: &Path, header: &RawHeader, payload: &[u8]) -> Result<()> {
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(header)?;
    fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    fs::write(path, payload).map_err(|e| Error::io(path, e))
}

pub(super) fn save_intensity(vol: &IntensityVolume, path: &Path) -> Result<()> {
    let g = vol.geometry();
    let header = RawHeader {
        dims: g.dims,
        spacing: g.spacing,
        origin: g.origin,
        kind: RawKind::Intensity,
        schema: None,
    };
    let payload: Vec<u8> = vol.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    write(path, &header, &payload)
}

pub(super) fn save_labels(vol: &LabelVolume, path: &Path) -> Result<()> {
    let g = vol.geometry();
    let header = RawHeader {
        dims: g.dims,
        spacing: g.spacing,
        origin: g.origin,
        kind: RawKind::Label,
        schema: Some(vol.schema()),
    };
    write(path, &header, vol.data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_spacing_accepted() {
        let h: RawHeader = serde_json::from_str(
            r#"{"dims":[1,2,3],"spacing":1.5,"origin":[0,0,0],"kind":"label"}"#,
        )
        .unwrap();
        assert_eq!(h.spacing, [1.5; 3]);
        assert_eq!(h.schema, None);
    }

    #[test]
    fn payload_size_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.raw");
        fs::write(
            dir.path().join("v.json"),
            r#"{"dims":[2,2,2],"spacing":[1,1,1],"origin":[0,0,0],"kind":"intensity"}"#,
        )
        .unwrap();
        fs::write(&p, [0u8; 31]).unwrap();
        assert!(matches!(load_intensity(&p), Err(Error::Format { .. })));
    }
}
