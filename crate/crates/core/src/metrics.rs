//! Motion-estimate error metrics.

use serde::{Deserialize, Serialize};

use crate::camera::CameraMotion;
use crate::error::{Error, Result};

/// Absolute per-axis rotation error and translation direction error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationError {
    /// `|A−A*|, |B−B*|, |C−C*|` in degrees: rotation about x, y and z.
    pub axes_deg: [f64; 3],
    /// Angle between the translation directions, degrees.
    pub translation_deg: f64,
}

impl RotationError {
    pub fn max_axis(&self) -> f64 {
        self.axes_deg.iter().copied().fold(0.0, f64::max)
    }
}

pub fn rotation_error(est: &CameraMotion, gt: &CameraMotion) -> RotationError {
    let e = est.rotation.as_array();
    let g = gt.rotation.as_array();
    RotationError {
        axes_deg: std::array::from_fn(|i| (e[i] - g[i]).abs().to_degrees()),
        translation_deg: est.translation.angle_to(&gt.translation).to_degrees(),
    }
}

/// Per-frame errors with their arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationErrorReport {
    pub frames: Vec<RotationError>,
    pub mean: RotationError,
}

impl RotationErrorReport {
    pub fn new(frames: Vec<RotationError>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("rotation error report"));
        }
        let n = frames.len() as f64;
        let mut mean = RotationError::default();
        for f in &frames {
            for (m, v) in mean.axes_deg.iter_mut().zip(f.axes_deg) {
                *m += v;
            }
            mean.translation_deg += f.translation_deg;
        }
        mean.axes_deg.iter_mut().for_each(|m| *m /= n);
        mean.translation_deg /= n;
        Ok(Self { frames, mean })
    }

    /// Errors of each estimate against the matching ground truth.
    pub fn compare(estimates: &[CameraMotion], truth: &[CameraMotion]) -> Result<Self> {
        if estimates.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: (truth.len(), 1),
                actual: (estimates.len(), 1),
            });
        }
        Self::new(estimates.iter().zip(truth).map(|(e, g)| rotation_error(e, g)).collect())
    }
}
