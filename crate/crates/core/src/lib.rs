//! Camera rotation and translation-direction estimation from dense optical
//! flow by maximum likelihood, rotation-compensated flow, and geometric
//! segmentation of independently moving objects.

pub mod camera;
pub mod error;
pub mod estimator;
pub mod field;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod motion_field;
pub mod pipeline;
pub mod segment;
pub mod synth;

pub use camera::{CameraIntrinsics, CameraMotion, Rotation, Translation};
pub use error::{Error, FloError, PfmError, Result, TableFileError};
pub use estimator::{estimate, weighted_nll, EstimateResult, EstimatorConfig, Models, MotionMask};
pub use field::{AngleMagnitude, DepthMap, FlowField, FlowKind, ScalarMap};
pub use likelihood::{
    InverseDepthPrior, IntegrationScheme, LikelihoodModel, LikelihoodTable, NoiseModel, TableResolution,
};
pub use metrics::{rotation_error, RotationError, RotationErrorReport};
pub use motion_field::{compensate, RotationMode};
pub use pipeline::{process_sequence, FrameOutput, Pipeline, PipelineConfig};
pub use segment::{iou, segment, SegmentationResult};
pub use synth::{SceneSpec, SceneTruth};
