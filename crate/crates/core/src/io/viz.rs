//! Flow colouring with the Middlebury colour wheel: hue encodes direction,
//! saturation encodes magnitude relative to a maximum, zero flow is white.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use super::write_atomic;
use crate::error::Result;
use crate::field::FlowField;

/// Per-frame magnitude percentile used as the saturation maximum.
pub const DEFAULT_COLOR_PERCENTILE: f64 = 0.99;

// Hue segment lengths: red-yellow, yellow-green, green-cyan, cyan-blue,
// blue-magenta, magenta-red.
const SEGMENTS: [usize; 6] = [15, 6, 4, 11, 13, 6];

fn color_wheel() -> Vec<[f64; 3]> {
    let mut wheel = Vec::with_capacity(SEGMENTS.iter().sum());
    let ramp = |i: usize, n: usize| i as f64 / n as f64;
    let [ry, yg, gc, cb, bm, mr] = SEGMENTS;
    wheel.extend((0..ry).map(|i| [1.0, ramp(i, ry), 0.0]));
    wheel.extend((0..yg).map(|i| [1.0 - ramp(i, yg), 1.0, 0.0]));
    wheel.extend((0..gc).map(|i| [0.0, 1.0, ramp(i, gc)]));
    wheel.extend((0..cb).map(|i| [0.0, 1.0 - ramp(i, cb), 1.0]));
    wheel.extend((0..bm).map(|i| [ramp(i, bm), 0.0, 1.0]));
    wheel.extend((0..mr).map(|i| [1.0, 0.0, 1.0 - ramp(i, mr)]));
    wheel
}

fn percentile_magnitude(field: &FlowField, q: f64) -> f64 {
    let mut mags = field.magnitudes();
    mags.sort_by(f64::total_cmp);
    let pos = q * (mags.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    mags[lo] + (mags[hi] - mags[lo]) * (pos - lo as f64)
}

/// Colours `field`. Magnitudes are divided by `max_magnitude`, by default
/// the frame's 99th-percentile magnitude; vectors beyond it are darkened.
pub fn flow_to_color(field: &FlowField, max_magnitude: Option<f64>) -> RgbImage {
    let (w, h) = field.dims();
    let wheel = color_wheel();
    let n = wheel.len();
    let max = max_magnitude.unwrap_or_else(|| percentile_magnitude(field, DEFAULT_COLOR_PERCENTILE));
    RgbImage::from_fn(w as u32, h as u32, |c, r| {
        let [u, v] = field.get(c as usize, r as usize);
        let mag = u.hypot(v);
        if !(max > 0.0) || mag == 0.0 {
            return Rgb([255; 3]);
        }
        let rad = mag / max;
        let a = (-v).atan2(-u) / std::f64::consts::PI;
        let fk = (a + 1.0) / 2.0 * (n - 1) as f64;
        let k0 = fk.floor() as usize % n;
        let k1 = (k0 + 1) % n;
        let f = fk - fk.floor();
        Rgb(std::array::from_fn(|ch| {
            let col = (1.0 - f) * wheel[k0][ch] + f * wheel[k1][ch];
            let col = if rad <= 1.0 { 1.0 - rad * (1.0 - col) } else { col * 0.75 };
            (255.0 * col).floor() as u8
        }))
    })
}

pub fn write_color_png(img: &RgbImage, path: &Path) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    write_atomic(path, &buf.into_inner())
}
