//! Lookup-table files: the 8-byte magic `RFLUT001`, three `u32` axis lengths
//! `(m, Δθ, g)`, the three axes as `f64`, then the values as `f64` in
//! row-major `(m, Δθ, g)` order. Little-endian throughout.

use std::path::Path;

use super::{read_limited, write_atomic};
use crate::error::{Result, TableFileError};
use crate::likelihood::{LikelihoodTable, TableAxes};

pub const TABLE_MAGIC: &[u8; 8] = b"RFLUT001";
/// Largest node count a header may advertise.
pub const MAX_TABLE_NODES: u64 = 1 << 27;

const HEADER: usize = 8 + 12;

pub fn encode_table(table: &LikelihoodTable) -> Vec<u8> {
    let axes = table.axes();
    let mut out = Vec::with_capacity(
        HEADER + 8 * (axes.m.len() + axes.dtheta.len() + axes.g.len() + table.values().len()),
    );
    out.extend_from_slice(TABLE_MAGIC);
    for n in [axes.m.len(), axes.dtheta.len(), axes.g.len()] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in axes.m.iter().chain(&axes.dtheta).chain(&axes.g).chain(table.values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_table(bytes: &[u8]) -> Result<LikelihoodTable> {
    if bytes.len() < TABLE_MAGIC.len() || &bytes[..8] != TABLE_MAGIC {
        return Err(TableFileError::BadMagic.into());
    }
    if bytes.len() < HEADER {
        return Err(TableFileError::Truncated {
            expected: HEADER as u64,
            found: bytes.len() as u64,
        }
        .into());
    }
    let dims: [u32; 3] = std::array::from_fn(|i| {
        u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes"))
    });
    let nodes = dims.iter().map(|&d| d as u64).product::<u64>();
    if dims.contains(&0) || nodes > MAX_TABLE_NODES {
        return Err(TableFileError::DimensionOverflow(dims).into());
    }
    let axis_len: u64 = dims.iter().map(|&d| d as u64).sum();
    let expected = HEADER as u64 + 8 * (axis_len + nodes);
    if (bytes.len() as u64) < expected {
        return Err(TableFileError::Truncated {
            expected,
            found: bytes.len() as u64,
        }
        .into());
    }
    let mut floats = bytes[HEADER..expected as usize]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |n: u32| -> Vec<f64> { floats.by_ref().take(n as usize).collect() };
    let axes = TableAxes {
        m: take(dims[0]),
        dtheta: take(dims[1]),
        g: take(dims[2]),
    };
    let values = floats.collect();
    LikelihoodTable::from_parts(axes, values)
        .map_err(|e| TableFileError::Invalid(e.to_string()).into())
}

pub fn read_table(path: &Path) -> Result<LikelihoodTable> {
    decode_table(&read_limited(path, HEADER as u64 + 8 * (MAX_TABLE_NODES + 3 * u32::MAX as u64))?)
}

pub fn write_table(table: &LikelihoodTable, path: &Path) -> Result<()> {
    write_atomic(path, &encode_table(table))
}
