//! Small synthetic scenes and models shared by the integration tests.

use std::sync::OnceLock;

use rotcomp::likelihood::{InverseDepthPrior, LikelihoodModel, NoiseModel, TableResolution};
use rotcomp::synth::CorpusParams;
use rotcomp::{CameraIntrinsics, Models};

/// Same field of view as the default 320×240 / f=250 camera at half size.
pub fn small_params() -> CorpusParams {
    CorpusParams {
        width: 160,
        height: 120,
        focal_length: 125.0,
        depth_grid: [21, 16],
        ..Default::default()
    }
}

pub fn small_intrinsics() -> CameraIntrinsics {
    let p = small_params();
    CameraIntrinsics::centered(p.focal_length, p.width, p.height).unwrap()
}

/// Tabulated model for noiseless flow (variance floored at 1e-12) with the
/// corpus inverse-depth rate.
pub fn noiseless_models() -> &'static Models {
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(|| models_with_variance(1e-12))
}

/// Tabulated model at the default noise variance.
pub fn default_models() -> &'static Models {
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(|| models_with_variance(NoiseModel::DEFAULT_COVARIANCE_SCALE))
}

pub fn models_with_variance(var: f64) -> Models {
    let intr = small_intrinsics();
    let mut model = LikelihoodModel::for_intrinsics(&intr);
    model.noise = NoiseModel::new(var, intr.diagonal()).unwrap();
    model.prior = InverseDepthPrior::new(small_params().inverse_depth_rate).unwrap();
    Models::tabulated(model, TableResolution::default()).unwrap()
}
