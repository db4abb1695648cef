//! Fitting the noise variance and the inverse-depth prior from ground truth.

use super::{InverseDepthPrior, NoiseModel};
use crate::error::{Error, Result};
use crate::field::{DepthMap, FlowField};

/// Mean per-axis squared deviation of `(est - gt) / normalizer`.
///
/// Returns the raw variance, which may be zero; see [`calibrate_noise`] for a
/// validated model.
pub fn measure_noise_variance(
    gt_flows: &[FlowField],
    est_flows: &[FlowField],
    flow_normalizer: f64,
) -> Result<f64> {
    if gt_flows.is_empty() {
        return Err(Error::EmptyInput("ground-truth flow list"));
    }
    if gt_flows.len() != est_flows.len() {
        return Err(Error::DimensionMismatch {
            expected: (gt_flows.len(), 1),
            actual: (est_flows.len(), 1),
        });
    }
    if !(flow_normalizer.is_finite() && flow_normalizer > 0.0) {
        return Err(Error::domain("flow normalizer must be positive"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (gt, est) in gt_flows.iter().zip(est_flows) {
        est.ensure_dims(gt.dims())?;
        for (a, b) in gt.data().iter().zip(est.data()) {
            let du = (b[0] - a[0]) / flow_normalizer;
            let dv = (b[1] - a[1]) / flow_normalizer;
            sum += du * du + dv * dv;
        }
        count += 2 * gt.data().len();
    }
    if count == 0 {
        return Err(Error::EmptyInput("flow fields have no pixels"));
    }
    Ok(sum / count as f64)
}

/// Fits a spherical noise model. The variance is floored at `1e-12` so the
/// result is always a valid model, even for identical inputs.
pub fn calibrate_noise(
    gt_flows: &[FlowField],
    est_flows: &[FlowField],
    flow_normalizer: f64,
) -> Result<NoiseModel> {
    let var = measure_noise_variance(gt_flows, est_flows, flow_normalizer)?;
    NoiseModel::new(var.max(1e-12), flow_normalizer)
}

/// Maximum-likelihood exponential fit to the inverse depths: `λ = 1 / mean(1/Z)`.
pub fn calibrate_depth_prior(depths: &[DepthMap]) -> Result<InverseDepthPrior> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for d in depths {
        for &z in d.map().data() {
            sum += 1.0 / z;
        }
        count += d.map().data().len();
    }
    if count == 0 {
        return Err(Error::EmptyInput("depth map list"));
    }
    InverseDepthPrior::new(count as f64 / sum)
}
