//! File formats: Middlebury `.flo`, grayscale PFM, the binary lookup table,
//! PNG masks and flow colouring, CSV records and synthetic scene directories.
//!
//! Every writer goes through a temporary file in the destination directory
//! that is renamed into place, so a failed write never leaves a partial file.

mod flo;
mod mask;
mod pfm;
mod records;
mod scene;
mod table_file;
mod viz;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC, MAX_FLO_PIXELS};
pub use mask::{read_mask_png, read_soft_png, write_mask_png, write_soft_png};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm, ByteOrder};
pub use records::{read_estimates, write_estimates, write_report, EstimateRecord};
pub use scene::{
    frame_stem, list_flo_files, read_frame_spec, scene_dirs, write_scene_frame, FRAME_SPEC_EXT,
};
pub use table_file::{
    decode_table, encode_table, read_table, write_table, MAX_TABLE_NODES, TABLE_MAGIC,
};
pub use viz::{flow_to_color, write_color_png, DEFAULT_COLOR_PERCENTILE};

use crate::error::Result;

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Reads a whole file, refusing anything larger than `limit` bytes before
/// allocating for it.
pub(crate) fn read_limited(path: &Path, limit: u64) -> Result<Vec<u8>> {
    let len = fs::metadata(path)?.len();
    if len > limit {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{} is {len} bytes, over the {limit}-byte limit", path.display()),
        )
        .into());
    }
    Ok(fs::read(path)?)
}
