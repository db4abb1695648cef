//! 8-bit grayscale PNG masks: binary masks as 0/255, soft masks scaled
//! linearly from [0, 1] to [0, 255].

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::field::ScalarMap;

fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

fn read_gray(path: &Path) -> Result<GrayImage> {
    Ok(image::open(path)?.into_luma8())
}

pub fn write_mask_png(mask: &[bool], width: usize, height: usize, path: &Path) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            actual: (mask.len(), 1),
        });
    }
    let img = GrayImage::from_fn(width as u32, height as u32, |c, r| {
        Luma([if mask[r as usize * width + c as usize] { 255 } else { 0 }])
    });
    write_atomic(path, &encode_png(&img)?)
}

/// Pixels brighter than mid-gray are set.
pub fn read_mask_png(path: &Path) -> Result<(Vec<bool>, usize, usize)> {
    let img = read_gray(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((img.pixels().map(|p| p.0[0] >= 128).collect(), w, h))
}

/// Values are clamped to [0, 1] and rounded to the nearest level.
pub fn write_soft_png(soft: &ScalarMap, path: &Path) -> Result<()> {
    let (w, h) = soft.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |c, r| {
        let v = soft.get(c as usize, r as usize);
        let v = if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) };
        Luma([(v * 255.0).round() as u8])
    });
    write_atomic(path, &encode_png(&img)?)
}

pub fn read_soft_png(path: &Path) -> Result<ScalarMap> {
    let img = read_gray(path)?;
    ScalarMap::from_vec(
        img.width() as usize,
        img.height() as usize,
        img.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
    )
}
