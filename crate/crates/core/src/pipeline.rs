//! Frame-by-frame closed loop: estimate camera motion, compensate rotation,
//! segment, re-estimate with the segmentation as weights, and carry the
//! evolving soft mask into the next frame.

use crate::camera::CameraIntrinsics;
use crate::error::Result;
use crate::estimator::{estimate, inverse_depth_proxy, weighted_nll, EstimateResult, EstimatorConfig, Models, MotionMask};
use crate::field::{FlowField, ScalarMap};
use crate::motion_field::compensate;
use crate::segment::{evolve_mask, segment, SegmentationResult, DEFAULT_BLEND, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub estimator: EstimatorConfig,
    pub threshold: f64,
    /// Weight of the warped previous mask when evolving.
    pub blend: f64,
    /// Weight the first estimate of each frame by the mask carried from the
    /// previous frame. Off means the first pass uses a uniform mask.
    pub mask_feedback: bool,
    /// Zero the weight of pixels above `threshold` instead of using `1 − soft`.
    pub binary_weights: bool,
    /// Extra estimate/segment rounds per frame, each weighted by the
    /// segmentation of the round before.
    pub refine_passes: usize,
    /// `keep_fraction` of the first frame's initial estimate, which has no
    /// mask to go on.
    pub bootstrap_keep: f64,
}

/// Trimming applied to every estimate so that object pixels the mask misses
/// cannot dominate the objective.
pub const DEFAULT_KEEP_FRACTION: f64 = 0.95;
/// Objects cover well under half the image, so the best-fitting half of the
/// pixels is background.
pub const DEFAULT_BOOTSTRAP_KEEP: f64 = 0.5;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig {
                keep_fraction: DEFAULT_KEEP_FRACTION,
                ..EstimatorConfig::default()
            },
            threshold: DEFAULT_THRESHOLD,
            blend: DEFAULT_BLEND,
            mask_feedback: true,
            binary_weights: true,
            refine_passes: 3,
            bootstrap_keep: DEFAULT_BOOTSTRAP_KEEP,
        }
    }
}

impl PipelineConfig {
    fn weights(&self, soft: &ScalarMap) -> Result<MotionMask> {
        if self.binary_weights {
            let (w, h) = soft.dims();
            let moving: Vec<bool> = soft.data().iter().map(|&v| v > self.threshold).collect();
            MotionMask::from_moving_pixels(w, h, &moving)
        } else {
            MotionMask::from_moving_probability(soft)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub estimate: EstimateResult,
    /// Weights the final estimate was computed with.
    pub weights: MotionMask,
    /// This frame's own segmentation.
    pub segmentation: SegmentationResult,
    /// Segmentation blended with the mask carried from earlier frames.
    pub evolved: SegmentationResult,
}

/// State carried between frames.
#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    prev: Option<EstimateResult>,
    prev_proxy: Option<ScalarMap>,
    prev_soft: Option<ScalarMap>,
    prev_flow: Option<FlowField>,
}

impl Pipeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Processes the flow from the current frame to the next.
    pub fn step(
        &mut self,
        observed: &FlowField,
        intr: &CameraIntrinsics,
        models: &Models,
        config: &PipelineConfig,
    ) -> Result<FrameOutput> {
        observed.ensure_dims(intr.dims())?;
        let mut weights = match (&self.prev_soft, &self.prev_flow, config.mask_feedback) {
            (Some(soft), Some(flow), true) => {
                // Pixels nothing lands on keep their old value.
                config.weights(&evolve_mask(soft, soft, flow, 1.0)?)?
            }
            _ => MotionMask::uniform(intr.width, intr.height),
        };
        let round = |weights: &MotionMask, prev: Option<&EstimateResult>, estimator: &EstimatorConfig| -> Result<_> {
            let est = estimate(observed, intr, prev, self.prev_proxy.as_ref(), weights, models, estimator)?;
            let compensated = compensate(observed, intr, est.motion.rotation, config.estimator.mode)?;
            let seg = segment(&compensated, intr, est.motion.translation, models, config.threshold)?;
            Ok((est, compensated, seg))
        };
        let first_pass = match self.prev {
            Some(_) => config.estimator,
            None => EstimatorConfig {
                keep_fraction: config.bootstrap_keep,
                ..config.estimator
            },
        };
        let (mut est, mut compensated, mut seg) = round(&weights, self.prev.as_ref(), &first_pass)?;
        for _ in 0..config.refine_passes {
            let next = config.weights(&seg.soft)?;
            if next == weights {
                break;
            }
            weights = next;
            // Start from whichever fits the new weights better: this frame's
            // estimate or the previous frame's.
            let mut start = est;
            if let Some(p) = self.prev {
                let score = |e: &EstimateResult| weighted_nll(observed, intr, &e.motion, &weights, models, &config.estimator);
                if score(&p)? < score(&est)? {
                    start = p;
                }
            }
            (est, compensated, seg) = round(&weights, Some(&start), &config.estimator)?;
        }
        let evolved_soft = match (&self.prev_soft, &self.prev_flow) {
            (Some(soft), Some(flow)) => evolve_mask(soft, &seg.soft, flow, config.blend)?,
            _ => seg.soft.clone(),
        };
        let evolved = SegmentationResult::from_soft(evolved_soft, config.threshold)?;

        self.prev_proxy = Some(inverse_depth_proxy(&compensated, intr, est.motion.translation)?);
        self.prev = Some(est);
        self.prev_soft = Some(evolved.soft.clone());
        self.prev_flow = Some(observed.clone());
        Ok(FrameOutput {
            estimate: est,
            weights,
            segmentation: seg,
            evolved,
        })
    }
}

/// Runs [`Pipeline::step`] over consecutive flows.
pub fn process_sequence(
    flows: &[FlowField],
    intr: &CameraIntrinsics,
    models: &Models,
    config: &PipelineConfig,
) -> Result<Vec<FrameOutput>> {
    let mut p = Pipeline::new();
    flows.iter().map(|f| p.step(f, intr, models, config)).collect()
}
