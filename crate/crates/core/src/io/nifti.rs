use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::schema::LabelSchema;
use crate::volume::{Geometry, IntensityVolume, LabelVolume, Volume};

use super::values_to_labels;

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

const LABEL_INTENT_PREFIX: &str = "lbl:";

// intent_name holds 15 characters plus a terminator.
fn schema_tag(schema: LabelSchema) -> &'static str {
    match schema {
        LabelSchema::Six => "SIX",
        LabelSchema::SixNoPaRefined => "SIX_NO_PA",
        LabelSchema::Seven => "SEVEN",
        LabelSchema::Ten => "TEN",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NiftiValues {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl NiftiValues {
    fn len(&self) -> usize {
        match self {
            NiftiValues::U8(v) => v.len(),
            NiftiValues::I16(v) => v.len(),
            NiftiValues::F32(v) => v.len(),
        }
    }

    fn datatype(&self) -> (i16, i16) {
        match self {
            NiftiValues::U8(_) => (DT_UINT8, 8),
            NiftiValues::I16(_) => (DT_INT16, 16),
            NiftiValues::F32(_) => (DT_FLOAT32, 32),
        }
    }

    fn iter_f64(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            NiftiValues::U8(v) => Box::new(v.iter().map(|&x| x as f64)),
            NiftiValues::I16(v) => Box::new(v.iter().map(|&x| x as f64)),
            NiftiValues::F32(v) => Box::new(v.iter().map(|&x| x as f64)),
        }
    }
}

/// Decoded contents of a NIfTI-1 file, reduced to an axis-aligned grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiData {
    pub geometry: Geometry,
    pub values: NiftiValues,
    /// `(slope, intercept)` when the file requests value scaling.
    pub scaling: Option<(f64, f64)>,
    pub intent_name: String,
}

impl NiftiData {
    pub fn from_intensity(vol: &IntensityVolume) -> Self {
        NiftiData {
            geometry: vol.geometry().clone(),
            values: NiftiValues::F32(vol.data().to_vec()),
            scaling: None,
            intent_name: String::new(),
        }
    }

    pub fn from_labels(vol: &LabelVolume) -> Self {
        NiftiData {
            geometry: vol.geometry().clone(),
            values: NiftiValues::U8(vol.data().to_vec()),
            scaling: None,
            intent_name: format!("{LABEL_INTENT_PREFIX}{}", schema_tag(vol.schema())),
        }
    }

    pub fn recorded_schema(&self) -> Option<LabelSchema> {
        self.intent_name
            .strip_prefix(LABEL_INTENT_PREFIX)
            .and_then(|tag| LabelSchema::ALL.into_iter().find(|&s| schema_tag(s) == tag))
    }

    fn scaled(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self.scaling {
            Some((slope, inter)) => {
                Box::new(self.values.iter_f64().map(move |v| v * slope + inter))
            }
            None => self.values.iter_f64(),
        }
    }

    pub fn into_intensity(self) -> Result<IntensityVolume> {
        let data = match (&self.values, self.scaling) {
            (NiftiValues::F32(v), None) => v.clone(),
            _ => self.scaled().map(|v| v as f32).collect(),
        };
        IntensityVolume::new(self.geometry, data)
    }

    pub fn into_labels(self, path: &Path, schema: Option<LabelSchema>) -> Result<LabelVolume> {
        let schema = schema.or_else(|| self.recorded_schema()).ok_or_else(|| {
            Error::format(path, "label schema neither given nor recorded in file")
        })?;
        let data = values_to_labels(self.scaled(), schema.max_id())?;
        LabelVolume::new(self.geometry, schema, data)
    }
}

fn le_i16(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn le_i32(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn le_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::format(path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Reads an axis-aligned NIfTI-1 file. Rotated or flipped affines are
/// rejected.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiData> {
    let path = path.as_ref();
    let b = read_bytes(path)?;
    if b.len() < HEADER_SIZE {
        return Err(Error::format(
            path,
            format!("only {} bytes, header needs 348", b.len()),
        ));
    }
    let sizeof_hdr = le_i32(&b, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        let reason = if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
            "big-endian NIfTI is not supported".to_string()
        } else {
            format!("sizeof_hdr is {sizeof_hdr}, not 348")
        };
        return Err(Error::format(path, reason));
    }
    if &b[344..348] != b"n+1\0" {
        return Err(Error::format(path, "not a single-file NIfTI-1 image"));
    }

    let ndim = le_i16(&b, 40);
    if !(3..=7).contains(&ndim) {
        return Err(Error::format(
            path,
            format!("expected a 3D image, dim[0] = {ndim}"),
        ));
    }
    let dim: Vec<i16> = (0..8).map(|i| le_i16(&b, 40 + 2 * i)).collect();
    if dim[1..4].iter().any(|&d| d <= 0) || dim[4..=ndim as usize].iter().any(|&d| d != 1) {
        return Err(Error::format(
            path,
            format!("unsupported dims {:?}", &dim[..=ndim as usize]),
        ));
    }
    let (nx, ny, nz) = (dim[1] as usize, dim[2] as usize, dim[3] as usize);

    let datatype = le_i16(&b, 70);
    let pixdim: Vec<f32> = (0..8).map(|i| le_f32(&b, 76 + 4 * i)).collect();
    let vox_offset = le_f32(&b, 108);
    let slope = le_f32(&b, 112) as f64;
    let inter = le_f32(&b, 116) as f64;
    let qform_code = le_i16(&b, 252);
    let sform_code = le_i16(&b, 254);

    let (spacing_xyz, origin_xyz) = if sform_code > 0 {
        let row = |r: usize| -> [f64; 4] {
            std::array::from_fn(|c| le_f32(&b, 280 + 16 * r + 4 * c) as f64)
        };
        let m = [row(0), row(1), row(2)];
        let scale = (0..3).map(|i| m[i][i].abs()).fold(0.0, f64::max);
        for (r, row) in m.iter().enumerate() {
            for (c, &v) in row.iter().take(3).enumerate() {
                if r != c && v.abs() > 1e-6 * scale {
                    return Err(Error::format(path, "rotated affines are not supported"));
                }
            }
        }
        if (0..3).any(|i| m[i][i] <= 0.0) {
            return Err(Error::format(path, "flipped axes are not supported"));
        }
        ([m[0][0], m[1][1], m[2][2]], [m[0][3], m[1][3], m[2][3]])
    } else {
        let spacing = [pixdim[1] as f64, pixdim[2] as f64, pixdim[3] as f64];
        if qform_code > 0 {
            let quat = [le_f32(&b, 256), le_f32(&b, 260), le_f32(&b, 264)];
            if quat.iter().any(|q| q.abs() > 1e-6) {
                return Err(Error::format(path, "rotated affines are not supported"));
            }
            if pixdim[0] < 0.0 {
                return Err(Error::format(path, "flipped axes are not supported"));
            }
            let offset = [
                le_f32(&b, 268) as f64,
                le_f32(&b, 272) as f64,
                le_f32(&b, 276) as f64,
            ];
            (spacing, offset)
        } else {
            (spacing, [0.0; 3])
        }
    };
    let geometry = Geometry::new(
        [nz, ny, nx],
        [spacing_xyz[2], spacing_xyz[1], spacing_xyz[0]],
        [origin_xyz[2], origin_xyz[1], origin_xyz[0]],
    )
    .map_err(|e| Error::format(path, e.to_string()))?;

    let n = nx * ny * nz;
    let offset = vox_offset.max(0.0) as usize;
    if offset < HEADER_SIZE {
        return Err(Error::format(
            path,
            format!("vox_offset {vox_offset} inside header"),
        ));
    }
    let elem = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(Error::UnsupportedDatatype(other)),
    };
    let body = b
        .get(offset..offset + n * elem)
        .ok_or_else(|| Error::format(path, format!("truncated: need {} data bytes", n * elem)))?;
    let values = match datatype {
        DT_UINT8 => NiftiValues::U8(body.to_vec()),
        DT_INT16 => NiftiValues::I16(
            body.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        _ => NiftiValues::F32(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };

    let scaling = (slope != 0.0 && slope.is_finite() && (slope != 1.0 || inter != 0.0))
        .then_some((slope, inter));
    let intent_name = String::from_utf8_lossy(&b[328..344])
        .trim_end_matches('\0')
        .to_string();

    Ok(NiftiData {
        geometry,
        values,
        scaling,
        intent_name,
    })
}

fn put_i16(b: &mut [u8], off: usize, v: i16) {
    b[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_i32(b: &mut [u8], off: usize, v: i32) {
    b[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(b: &mut [u8], off: usize, v: f32) {
    b[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn encode(data: &NiftiData) -> Result<Vec<u8>> {
    let [nz, ny, nx] = data.geometry.dims;
    if [nz, ny, nx].iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::InvalidArgument(format!(
            "dims {:?} exceed NIfTI-1 limits",
            data.geometry.dims
        )));
    }
    let [sz, sy, sx] = data.geometry.spacing;
    let [oz, oy, ox] = data.geometry.origin;
    let (datatype, bitpix) = data.values.datatype();

    let mut out = vec![0u8; DATA_OFFSET + data.values.len() * (bitpix as usize / 8)];
    let h = &mut out[..];
    put_i32(h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    for (i, d) in [3, nx, ny, nz, 1, 1, 1, 1].into_iter().enumerate() {
        put_i16(h, 40 + 2 * i, d as i16);
    }
    put_i16(h, 70, datatype);
    put_i16(h, 72, bitpix);
    for (i, p) in [1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0]
        .into_iter()
        .enumerate()
    {
        put_f32(h, 76 + 4 * i, p as f32);
    }
    put_f32(h, 108, DATA_OFFSET as f32);
    let (slope, inter) = data.scaling.unwrap_or((1.0, 0.0));
    put_f32(h, 112, slope as f32);
    put_f32(h, 116, inter as f32);
    h[123] = 2; // millimetres
    let descrip = b"cardiorefine";
    h[148..148 + descrip.len()].copy_from_slice(descrip);
    put_i16(h, 252, 1);
    put_i16(h, 254, 1);
    put_f32(h, 268, ox as f32);
    put_f32(h, 272, oy as f32);
    put_f32(h, 276, oz as f32);
    let rows = [[sx, 0.0, 0.0, ox], [0.0, sy, 0.0, oy], [0.0, 0.0, sz, oz]];
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            put_f32(h, 280 + 16 * r + 4 * c, v as f32);
        }
    }
    let intent = data.intent_name.as_bytes();
    let n = intent.len().min(15);
    h[328..328 + n].copy_from_slice(&intent[..n]);
    h[344..348].copy_from_slice(b"n+1\0");

    let body = &mut out[DATA_OFFSET..];
    match &data.values {
        NiftiValues::U8(v) => body.copy_from_slice(v),
        NiftiValues::I16(v) => {
            for (dst, x) in body.chunks_exact_mut(2).zip(v) {
                dst.copy_from_slice(&x.to_le_bytes());
            }
        }
        NiftiValues::F32(v) => {
            for (dst, x) in body.chunks_exact_mut(4).zip(v) {
                dst.copy_from_slice(&x.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_nifti(path: impl AsRef<Path>, data: &NiftiData, gzip: bool) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(data)?;
    let bytes = if gzip {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
