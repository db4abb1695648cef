//! Geometric motion segmentation.
//!
//! A pixel whose rotation-compensated flow is improbable under the camera
//! translation (wrong direction for any depth, or an implausible magnitude)
//! is scored as moving. Scores are per-pixel negative log-likelihoods mapped
//! affinely onto `[0, 1]`, carried across frames by forward warping and
//! optionally smoothed with a separable space-time Gaussian.

use crate::camera::{CameraIntrinsics, Translation};
use crate::error::{Error, Result};
use crate::estimator::Models;
use crate::field::{FlowField, ScalarMap};
use crate::likelihood::likelihood_coordinates;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_BLEND: f64 = 0.5;
/// Percentiles of the frame's own nll map used as `(nll_lo, nll_hi)`.
pub const DEFAULT_CALIBRATION_PERCENTILES: (f64, f64) = (0.10, 0.90);
/// Smallest `nll_hi − nll_lo`, in nats. Objects covering less than the upper
/// percentile's share of the frame would otherwise stretch ordinary
/// background variation over the full `[0, 1]` range.
pub const MIN_CALIBRATION_SPAN: f64 = 10.0;
pub const DEFAULT_SIGMA_SPATIAL: f64 = 1.0;
pub const DEFAULT_SIGMA_TEMPORAL: f64 = 1.0;

/// Moving-object probabilities and their thresholded mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// `P(moving)` per pixel.
    pub soft: ScalarMap,
    /// `soft > threshold`, row-major.
    pub binary: Vec<bool>,
    pub threshold: f64,
}

impl SegmentationResult {
    pub fn from_soft(soft: ScalarMap, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::domain(format!("threshold {threshold} outside [0, 1]")));
        }
        if soft.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("soft mask values must lie in [0, 1]"));
        }
        let binary = soft.data().iter().map(|&v| v > threshold).collect();
        Ok(Self {
            soft,
            binary,
            threshold,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.soft.dims()
    }

    pub fn moving_fraction(&self) -> f64 {
        self.binary.iter().filter(|&&b| b).count() as f64 / self.binary.len().max(1) as f64
    }
}

/// Per-pixel `-log p(o_t | U, V, W, x, y)` of rotation-compensated flow in
/// pixels. Uses the lookup table when `models` carries one.
pub fn background_nll_map(
    compensated: &FlowField,
    intr: &CameraIntrinsics,
    trans: Translation,
    models: &Models,
) -> Result<ScalarMap> {
    intr.validate()?;
    trans.validate()?;
    compensated.ensure_dims(intr.dims())?;
    if !compensated.is_finite() {
        return Err(Error::NonFinite("compensated flow"));
    }
    models.likelihood.validate()?;
    let n = models.likelihood.noise.flow_normalizer;
    let f = intr.focal_length;
    Ok(ScalarMap::from_fn(intr.width, intr.height, |col, row| {
        let (x, y) = intr.offset(col, row);
        let o = compensated.get(col, row);
        let (m, c, g) = likelihood_coordinates([o[0] / n, o[1] / n], f, x, y, trans, n);
        -models.log_likelihood(m, c, g)
    }))
}

/// Linearly interpolated `q`-quantile of the map's values, `q ∈ [0, 1]`.
pub fn percentile(map: &ScalarMap, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile {q} outside [0, 1]")));
    }
    let mut v = map.data().to_vec();
    if v.is_empty() {
        return Err(Error::EmptyInput("map"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("map"));
    }
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    Ok(v[i] + (v[j] - v[i]) * (pos - i as f64))
}

/// Affine map `nll_lo ↦ 0`, `nll_hi ↦ 1`, clamped to `[0, 1]`.
pub fn soft_mask_from_nll(nll: &ScalarMap, calibration: (f64, f64)) -> Result<ScalarMap> {
    let (lo, hi) = calibration;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!("calibration needs nll_lo < nll_hi, got ({lo}, {hi})")));
    }
    let span = hi - lo;
    Ok(nll.map(|v| {
        let s = (v - lo) / span;
        // NaN nll counts as maximally unexplained.
        if s.is_nan() {
            1.0
        } else {
            s.clamp(0.0, 1.0)
        }
    }))
}

/// Segments one frame, calibrating against the percentiles of its own nll
/// map. A frame whose percentiles coincide has nothing that stands out and
/// is reported as entirely static.
pub fn segment(
    compensated: &FlowField,
    intr: &CameraIntrinsics,
    trans: Translation,
    models: &Models,
    threshold: f64,
) -> Result<SegmentationResult> {
    let nll = background_nll_map(compensated, intr, trans, models)?;
    let (q_lo, q_hi) = DEFAULT_CALIBRATION_PERCENTILES;
    let lo = percentile(&nll, q_lo)?;
    let hi = percentile(&nll, q_hi)?.max(lo + MIN_CALIBRATION_SPAN);
    SegmentationResult::from_soft(soft_mask_from_nll(&nll, (lo, hi))?, threshold)
}

/// Carries the previous soft mask forward along `flow` (each pixel moves to
/// the nearest pixel of its destination; where several land on one pixel the
/// largest value wins; pixels nothing lands on take `current`), then blends
/// `alpha · warped + (1 − alpha) · current`.
pub fn evolve_mask(
    prev: &ScalarMap,
    current: &ScalarMap,
    flow: &FlowField,
    alpha: f64,
) -> Result<ScalarMap> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("blend {alpha} outside [0, 1]")));
    }
    let dims = current.dims();
    prev.ensure_dims(dims)?;
    flow.ensure_dims(dims)?;
    let (w, h) = dims;
    let mut warped: Vec<Option<f64>> = vec![None; w * h];
    for row in 0..h {
        for col in 0..w {
            let [u, v] = flow.get(col, row);
            let (tc, tr) = ((col as f64 + u).round(), (row as f64 + v).round());
            if tc >= 0.0 && tr >= 0.0 && (tc as usize) < w && (tr as usize) < h {
                let idx = tr as usize * w + tc as usize;
                let p = prev.get(col, row);
                warped[idx] = Some(warped[idx].map_or(p, |q: f64| q.max(p)));
            }
        }
    }
    let out = warped
        .iter()
        .zip(current.data())
        .map(|(wv, &c)| alpha * wv.unwrap_or(c) + (1.0 - alpha) * c)
        .collect();
    ScalarMap::from_vec(w, h, out)
}

/// Normalized Gaussian taps out to `ceil(3σ)`; `[1.0]` for `σ = 0`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Half-sample symmetric reflection (`-1 ↦ 0`, `n ↦ n - 1`), folded as
/// often as needed. Keeps the filtered sum equal to the input sum.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// One 1-D pass along an axis of a `[t][row][col]` volume.
fn convolve_axis(data: &[f64], shape: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    if kernel.len() == 1 {
        return data.to_vec();
    }
    let strides = [shape[1] * shape[2], shape[2], 1];
    let radius = (kernel.len() / 2) as i64;
    let n = shape[axis];
    let mut out = vec![0.0; data.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let pos = (idx / strides[axis]) % n;
        let base = idx - pos * strides[axis];
        *o = kernel
            .iter()
            .enumerate()
            .map(|(k, w)| w * data[base + reflect(pos as i64 + k as i64 - radius, n) * strides[axis]])
            .sum();
    }
    out
}

/// Separable Gaussian smoothing over columns, rows and frames with
/// reflective boundaries. Zero sigmas leave the corresponding axis alone.
pub fn temporal_smooth(
    masks: &[ScalarMap],
    sigma_spatial: f64,
    sigma_temporal: f64,
) -> Result<Vec<ScalarMap>> {
    let first = masks.first().ok_or(Error::EmptyInput("mask sequence"))?;
    for s in [sigma_spatial, sigma_temporal] {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::domain(format!("smoothing sigma {s} must be finite and >= 0")));
        }
    }
    let (w, h) = first.dims();
    for m in masks {
        m.ensure_dims((w, h))?;
    }
    let shape = [masks.len(), h, w];
    let mut data: Vec<f64> = masks.iter().flat_map(|m| m.data().iter().copied()).collect();
    let spatial = gaussian_kernel(sigma_spatial);
    data = convolve_axis(&data, shape, 2, &spatial);
    data = convolve_axis(&data, shape, 1, &spatial);
    data = convolve_axis(&data, shape, 0, &gaussian_kernel(sigma_temporal));
    data.chunks(w * h)
        .map(|frame| ScalarMap::from_vec(w, h, frame.to_vec()))
        .collect()
}

/// `|pred ∧ gt| / |pred ∨ gt|`, defined as 1 when both are empty.
pub fn iou(pred: &[bool], gt: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: (gt.len(), 1),
            actual: (pred.len(), 1),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}
