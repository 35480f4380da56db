//! `.w3u` weight files.
//!
//! Layout: the 8-byte magic `W3UNET01`, a little-endian u64 manifest
//! length, the JSON manifest, then the tensors as packed little-endian
//! arrays in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::UNetConfig;
use crate::error::{Error, Result};
use crate::model::UNet;
use crate::scalar::Scalar;
use crate::store::WeightStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"W3UNET01";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: usize,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: UNetConfig,
    pub tensors: Vec<TensorEntry>,
}

pub fn to_bytes<T: Scalar>(model: &UNet<T>) -> Vec<u8> {
    let mut blob = Vec::with_capacity(model.parameter_count() * T::BYTES);
    let mut tensors = Vec::new();
    for (name, t) in model.weights().iter() {
        let offset = blob.len();
        for &v in t.data() {
            v.put_le(&mut blob);
        }
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            dtype: T::DTYPE.into(),
            offset,
            bytes: blob.len() - offset,
        });
    }
    let manifest = serde_json::to_vec_pretty(&Manifest { config: model.config().clone(), tensors })
        .expect("manifest serialises");
    let mut out = Vec::with_capacity(16 + manifest.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&blob);
    out
}

fn read_as<T: Scalar>(dtype: &str, raw: &[u8]) -> Option<Vec<T>> {
    match dtype {
        "f32" => Some(raw.chunks_exact(4).map(|c| T::of(f32::get_le(c) as f64)).collect()),
        "f64" => Some(raw.chunks_exact(8).map(|c| T::of(f64::get_le(c))).collect()),
        _ => None,
    }
}

fn dtype_size(dtype: &str) -> Option<usize> {
    match dtype {
        "f32" => Some(4),
        "f64" => Some(8),
        _ => None,
    }
}

/// Parses a weight file image, converting stored values to `T`.
pub fn from_bytes<T: Scalar>(bytes: &[u8], origin: &Path) -> Result<UNet<T>> {
    let bad = |reason: String| Error::format(origin, reason);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing W3UNET01 header".into()));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if mlen > body.len() {
        return Err(bad(format!("manifest claims {mlen} bytes, file has {}", body.len())));
    }
    let manifest: Manifest =
        serde_json::from_slice(&body[..mlen]).map_err(|e| bad(format!("manifest is not valid JSON: {e}")))?;
    let blob = &body[mlen..];
    let mut entries = Vec::with_capacity(manifest.tensors.len());
    let mut expected_offset = 0;
    for e in &manifest.tensors {
        let layer = e.name.rsplit_once('.').map_or(e.name.as_str(), |(l, _)| l);
        let size = dtype_size(&e.dtype).ok_or_else(|| Error::mismatch(layer, format!("unknown dtype `{}`", e.dtype)))?;
        let count: usize = e.shape.iter().product();
        if e.bytes != count * size {
            return Err(Error::mismatch(
                layer,
                format!("`{}` declares {} bytes for shape {:?}", e.name, e.bytes, e.shape),
            ));
        }
        if e.offset != expected_offset {
            return Err(bad(format!("`{}` starts at {}, expected {expected_offset}", e.name, e.offset)));
        }
        let end = e.offset + e.bytes;
        if end > blob.len() {
            return Err(bad(format!("truncated: `{}` needs bytes up to {end}, blob has {}", e.name, blob.len())));
        }
        let data = read_as::<T>(&e.dtype, &blob[e.offset..end]).expect("dtype checked");
        entries.push((e.name.clone(), Tensor::from_vec(&e.shape, data)?));
        expected_offset = end;
    }
    if expected_offset != blob.len() {
        return Err(bad(format!("{} trailing bytes after the last tensor", blob.len() - expected_offset)));
    }
    UNet::from_weights(manifest.config, WeightStore::new(entries))
}

pub fn save_weights<T: Scalar>(model: &UNet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<UNet<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
