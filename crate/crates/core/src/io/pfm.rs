//! Grayscale PFM (`Pf`) depth maps. The header's scale is negative for
//! little-endian payloads and positive for big-endian; rows are stored
//! bottom to top.

use std::path::Path;

use super::{read_limited, write_atomic};
use crate::error::{PfmError, Result};
use crate::field::{DepthMap, ScalarMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

const MAX_PIXELS: u64 = 1 << 28;

pub fn encode_pfm(depth: &DepthMap, order: ByteOrder) -> Vec<u8> {
    let (w, h) = depth.dims();
    let scale = match order {
        ByteOrder::Little => "-1.0",
        ByteOrder::Big => "1.0",
    };
    let mut out = format!("Pf\n{w} {h}\n{scale}\n").into_bytes();
    out.reserve(4 * w * h);
    for row in (0..h).rev() {
        for col in 0..w {
            let v = depth.get(col, row) as f32;
            out.extend_from_slice(&match order {
                ByteOrder::Little => v.to_le_bytes(),
                ByteOrder::Big => v.to_be_bytes(),
            });
        }
    }
    out
}

/// Splits off the next whitespace-delimited header token, returning it and
/// the offset just past the single whitespace byte that ends it.
fn token(bytes: &[u8], mut at: usize) -> Result<(&str, usize)> {
    while at < bytes.len() && bytes[at].is_ascii_whitespace() {
        at += 1;
    }
    let start = at;
    while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
        at += 1;
    }
    if start == at || at >= bytes.len() {
        return Err(PfmError::MalformedHeader("header ends early".into()).into());
    }
    let s = std::str::from_utf8(&bytes[start..at])
        .map_err(|_| PfmError::MalformedHeader("header is not ASCII".into()))?;
    Ok((s, at + 1))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let (kind, at) = token(bytes, 0)?;
    match kind {
        "Pf" => {}
        "PF" => return Err(PfmError::NotGrayscale(kind.into()).into()),
        other => return Err(PfmError::MalformedHeader(format!("unknown type {other:?}")).into()),
    }
    let (w, at) = token(bytes, at)?;
    let (h, at) = token(bytes, at)?;
    let (scale, at) = token(bytes, at)?;
    let dim = |s: &str| -> Result<u64> {
        match s.parse::<u64>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(PfmError::MalformedHeader(format!("bad dimension {s:?}")).into()),
        }
    };
    let (w, h) = (dim(w)?, dim(h)?);
    if w.saturating_mul(h) > MAX_PIXELS {
        return Err(PfmError::MalformedHeader(format!("{w}x{h} exceeds the size limit")).into());
    }
    let scale: f64 = scale
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| PfmError::MalformedHeader(format!("bad scale {scale:?}")))?;
    let order = if scale < 0.0 { ByteOrder::Little } else { ByteOrder::Big };

    let expected = 4 * w * h;
    let payload = &bytes[at..];
    if (payload.len() as u64) < expected {
        return Err(PfmError::Truncated {
            expected,
            found: payload.len() as u64,
        }
        .into());
    }
    let (w, h) = (w as usize, h as usize);
    let mut data = vec![0.0; w * h];
    for (i, c) in payload[..expected as usize].chunks_exact(4).enumerate() {
        let b: [u8; 4] = c.try_into().expect("4 bytes");
        let v = match order {
            ByteOrder::Little => f32::from_le_bytes(b),
            ByteOrder::Big => f32::from_be_bytes(b),
        };
        let (row, col) = (h - 1 - i / w, i % w);
        data[row * w + col] = v as f64;
    }
    DepthMap::new(ScalarMap::from_vec(w, h, data)?)
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    decode_pfm(&read_limited(path, 4 * MAX_PIXELS + 256)?)
}

/// Writes little-endian.
pub fn write_pfm(depth: &DepthMap, path: &Path) -> Result<()> {
    write_atomic(path, &encode_pfm(depth, ByteOrder::Little))
}
