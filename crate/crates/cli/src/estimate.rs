use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, ValueEnum};
use rotcomp::io::{read_mask_png, write_estimates, EstimateRecord};
use rotcomp::{estimate, MotionMask, Pipeline};
use serde::{Deserialize, Serialize};

use crate::inputs::{intrinsics, read_flow, scenes, EstimatorArgs, ModelArgs, ModelCache};

/// Where the per-pixel weights come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    /// Closed loop: segment each frame and carry the masks forward.
    #[default]
    Loop,
    /// Every pixel counts.
    Uniform,
    /// Ground-truth `frame_NNNN.mask.png` next to each flow file.
    Gt,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// A scene directory of `.flo` files, or a directory of scene directories.
    pub input: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Pixel weights [default: loop].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub masks: Option<MaskSource>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

pub fn run(a: EstimateArgs) -> Result<()> {
    let scenes = scenes(&a.input)?;
    ensure!(!scenes.is_empty(), "no .flo files under {}", a.input.display());
    let mut models = ModelCache::new(a.model.clone())?;
    let config = a.estimator.pipeline(&models)?;
    let source = a.masks.unwrap_or_default();

    let mut records = Vec::new();
    for scene in &scenes {
        let mut pipeline = Pipeline::new();
        let mut prev = None;
        for frame in &scene.frames {
            let flow = read_flow(&frame.path)?;
            let intr = intrinsics(&frame.path, &flow, a.estimator.focal)?;
            let m = models.get(&intr)?;
            let est = match source {
                MaskSource::Loop => pipeline.step(&flow, &intr, m, &config)?.estimate,
                MaskSource::Uniform | MaskSource::Gt => {
                    let weights = if source == MaskSource::Gt {
                        let path = frame.path.with_extension("mask.png");
                        let (moving, w, h) = read_mask_png(&path).with_context(|| format!("reading {}", path.display()))?;
                        MotionMask::from_moving_pixels(w, h, &moving)?
                    } else {
                        MotionMask::uniform(intr.width, intr.height)
                    };
                    estimate(&flow, &intr, prev.as_ref(), None, &weights, m, &config.estimator)?
                }
            };
            prev = Some(est);
            records.push(EstimateRecord::new(&scene.name, frame.index, &est));
        }
    }
    write_estimates(&records, &a.out)?;
    println!("wrote {} estimates for {} scenes to {}", records.len(), scenes.len(), a.out.display());
    Ok(())
}
