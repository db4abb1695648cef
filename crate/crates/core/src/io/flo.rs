//! Middlebury `.flo`: `f32` magic 202021.25, `i32` width and height, then
//! row-major interleaved `f32` (u, v) pairs, all little-endian.

use std::path::Path;

use super::{read_limited, write_atomic};
use crate::error::{FloError, Result};
use crate::field::{FlowField, FlowKind};

pub const FLO_MAGIC: f32 = 202021.25;
/// Largest pixel count a header may advertise.
pub const MAX_FLO_PIXELS: i64 = 1 << 28;

const HEADER: usize = 12;

/// Encodes a field; values are narrowed to `f32`.
pub fn encode_flo(field: &FlowField) -> Result<Vec<u8>> {
    let (w, h) = field.dims();
    if w == 0 || h == 0 || (w as i64) * (h as i64) > MAX_FLO_PIXELS {
        return Err(FloError::DimensionOverflow {
            width: w as i64,
            height: h as i64,
        }
        .into());
    }
    let mut out = Vec::with_capacity(HEADER + 8 * w * h);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for p in field.data() {
        out.extend_from_slice(&(p[0] as f32).to_le_bytes());
        out.extend_from_slice(&(p[1] as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER {
        return Err(FloError::Truncated {
            expected: HEADER as u64,
            found: bytes.len() as u64,
        }
        .into());
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4 bytes") };
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(FloError::BadMagic(magic).into());
    }
    let w = i32::from_le_bytes(word(4)) as i64;
    let h = i32::from_le_bytes(word(8)) as i64;
    if w <= 0 || h <= 0 || w * h > MAX_FLO_PIXELS {
        return Err(FloError::DimensionOverflow { width: w, height: h }.into());
    }
    let expected = HEADER as u64 + 8 * (w * h) as u64;
    if (bytes.len() as u64) < expected {
        return Err(FloError::Truncated {
            expected,
            found: bytes.len() as u64,
        }
        .into());
    }
    let data = bytes[HEADER..expected as usize]
        .chunks_exact(8)
        .map(|c| {
            let u = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let v = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            [u as f64, v as f64]
        })
        .collect();
    FlowField::from_vec(w as usize, h as usize, data, FlowKind::Observed)
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    decode_flo(&read_limited(path, HEADER as u64 + 8 * MAX_FLO_PIXELS as u64)?)
}

pub fn write_flo(field: &FlowField, path: &Path) -> Result<()> {
    write_atomic(path, &encode_flo(field)?)
}
