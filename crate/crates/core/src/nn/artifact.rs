//! Flat-float parameter container.
//!
//! ```text
//! offset  size       field
//! 0       4          magic (ASCII, e.g. "IPRB" or "EVNT")
//! 4       4          format version, u32 LE (currently 1)
//! 8       4          tensor count T, u32 LE
//! 12      4          total float count F, u32 LE
//! 16      4*T        per-tensor float counts, u32 LE, in layout order
//! 16+4T   4*F        values, f32 LE, tensors concatenated in layout order
//! ```
//!
//! Shapes are implied by the model architecture; the loader checks every
//! tensor length against the expected layout.

use std::path::Path;

use super::ParamSet;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode(magic: &[u8; 4], params: &ParamSet) -> Vec<u8> {
    let specs = params.specs();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * specs.len() + 4 * params.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(specs.len() as u32).to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for s in specs {
        out.extend_from_slice(&(s.len as u32).to_le_bytes());
    }
    for v in &params.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Artifact(format!("truncated at byte {at}")))
}

/// Fills `template` (whose layout defines the expected shapes) from `bytes`.
pub fn decode_into(magic: &[u8; 4], bytes: &[u8], template: &mut ParamSet) -> Result<()> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != magic {
        return Err(Error::Artifact(format!(
            "expected magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(bytes, 4)?;
    if version != FORMAT_VERSION {
        return Err(Error::Artifact(format!("unsupported version {version}")));
    }
    let count = read_u32(bytes, 8)? as usize;
    let total = read_u32(bytes, 12)? as usize;
    if count != template.specs().len() || total != template.len() {
        return Err(Error::Artifact(format!(
            "layout mismatch: file has {count} tensors / {total} floats, expected {} / {}",
            template.specs().len(),
            template.len()
        )));
    }
    for (i, s) in template.specs().iter().enumerate() {
        let len = read_u32(bytes, HEADER_LEN + 4 * i)? as usize;
        if len != s.len {
            return Err(Error::Artifact(format!(
                "tensor {} ({}) has {len} floats, expected {}",
                i, s.name, s.len
            )));
        }
    }
    let data_start = HEADER_LEN + 4 * count;
    if bytes.len() != data_start + 4 * total {
        return Err(Error::Artifact(format!(
            "expected {} bytes, got {}",
            data_start + 4 * total,
            bytes.len()
        )));
    }
    for (i, v) in template.values.iter_mut().enumerate() {
        let b = &bytes[data_start + 4 * i..data_start + 4 * i + 4];
        let f = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        if !f.is_finite() {
            return Err(Error::Artifact(format!("non-finite value at index {i}")));
        }
        *v = f as f64;
    }
    Ok(())
}

/// Per-tensor float counts from the header, for layouts with a free dimension.
pub fn tensor_lengths(magic: &[u8; 4], bytes: &[u8]) -> Result<Vec<usize>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != magic {
        return Err(Error::Artifact(format!(
            "expected magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let count = read_u32(bytes, 8)? as usize;
    (0..count).map(|i| read_u32(bytes, HEADER_LEN + 4 * i).map(|v| v as usize)).collect()
}

pub fn save(path: &Path, magic: &[u8; 4], params: &ParamSet) -> Result<usize> {
    let bytes = encode(magic, params);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len())
}

pub fn load_into(path: &Path, magic: &[u8; 4], template: &mut ParamSet) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_into(magic, &bytes, template)
}
