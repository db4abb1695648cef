//! Synthetic scene directories. Frame `k` of a scene is stored as
//!
//! - `frame_k.flo`: observed (noisy) flow
//! - `frame_k.depth.pfm`: depth
//! - `frame_k.mask.png`: ground-truth moving-object mask
//! - `frame_k.toml`: the [`SceneSpec`], which holds intrinsics and motion
//!
//! with `k` zero-padded to four digits.

use std::fs;
use std::path::{Path, PathBuf};

use super::{flo, mask, pfm, write_atomic};
use crate::error::{Error, Result};
use crate::synth::{SceneSpec, SceneTruth};

pub const FRAME_SPEC_EXT: &str = "toml";

pub fn frame_stem(frame: usize) -> String {
    format!("frame_{frame:04}")
}

pub fn write_scene_frame(dir: &Path, frame: usize, spec: &SceneSpec, truth: &SceneTruth) -> Result<()> {
    let stem = frame_stem(frame);
    let (w, h) = spec.intr.dims();
    let text = toml::to_string(spec).map_err(|e| Error::SceneFile(e.to_string()))?;
    flo::write_flo(&truth.noisy_flow, &dir.join(format!("{stem}.flo")))?;
    pfm::write_pfm(&truth.depth, &dir.join(format!("{stem}.depth.pfm")))?;
    mask::write_mask_png(&truth.gt_mask, w, h, &dir.join(format!("{stem}.mask.png")))?;
    write_atomic(&dir.join(format!("{stem}.{FRAME_SPEC_EXT}")), text.as_bytes())
}

pub fn read_frame_spec(path: &Path) -> Result<SceneSpec> {
    let text = fs::read_to_string(path)?;
    let spec: SceneSpec =
        toml::from_str(&text).map_err(|e| Error::SceneFile(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

/// The `.flo` files directly inside `dir`, sorted by name.
pub fn list_flo_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "flo") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Directories holding flow sequences: `root` itself if it contains `.flo`
/// files, otherwise its immediate subdirectories that do, sorted by name.
pub fn scene_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if !list_flo_files(root)?.is_empty() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.is_dir() && !list_flo_files(&path)?.is_empty() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::EmptyInput("no .flo files found"));
    }
    Ok(dirs)
}
