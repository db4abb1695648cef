use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::Args;
use rotcomp::io::{frame_stem, read_estimates, write_mask_png, write_soft_png};
use rotcomp::segment::{evolve_mask, temporal_smooth, DEFAULT_BLEND, DEFAULT_SIGMA_SPATIAL, DEFAULT_SIGMA_TEMPORAL};
use rotcomp::{compensate, Pipeline, ScalarMap};
use serde::{Deserialize, Serialize};

use crate::inputs::{intrinsics, read_flow, scenes, EstimatorArgs, ModelArgs, ModelCache, StagedDir};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SegmentArgs {
    /// A scene directory of `.flo` files, or a directory of scene directories.
    pub input: PathBuf,
    /// Directory to create, with `<scene>/frame_NNNN.mask.png` and
    /// `<scene>/frame_NNNN.soft.png` per frame.
    #[arg(long)]
    pub out: PathBuf,
    /// Use the motion in this estimates CSV instead of estimating it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimates: Option<PathBuf>,
    /// Moving-probability threshold [default: 0.5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    /// Smooth the soft masks over space and time before thresholding.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub smooth: bool,
    /// Spatial smoothing sigma in pixels [default: 1].
    #[arg(long, requires = "smooth")]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma_spatial: Option<f64>,
    /// Temporal smoothing sigma in frames [default: 1].
    #[arg(long, requires = "smooth")]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma_temporal: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

pub fn run(a: SegmentArgs) -> Result<()> {
    let scenes = scenes(&a.input)?;
    ensure!(!scenes.is_empty(), "no .flo files under {}", a.input.display());
    let mut models = ModelCache::new(a.model.clone())?;
    let mut config = a.estimator.pipeline(&models)?;
    config.threshold = a.threshold.unwrap_or(config.threshold);
    ensure!((0.0..=1.0).contains(&config.threshold), "--threshold must lie in [0, 1]");
    let motions = match &a.estimates {
        Some(csv) => {
            let rows = read_estimates(csv).with_context(|| format!("reading {}", csv.display()))?;
            let mut by_frame = HashMap::new();
            for r in rows {
                by_frame.insert((r.scene.clone(), r.frame), r.motion()?);
            }
            Some(by_frame)
        }
        None => None,
    };

    let staged = StagedDir::new(&a.out)?;
    let mut frames_written = 0;
    for scene in &scenes {
        let mut softs: Vec<ScalarMap> = Vec::with_capacity(scene.frames.len());
        let mut pipeline = Pipeline::new();
        let mut prev: Option<(ScalarMap, rotcomp::FlowField)> = None;
        for frame in &scene.frames {
            let flow = read_flow(&frame.path)?;
            let intr = intrinsics(&frame.path, &flow, a.estimator.focal)?;
            let m = models.get(&intr)?;
            let soft = match &motions {
                None => pipeline.step(&flow, &intr, m, &config)?.evolved.soft,
                Some(by_frame) => {
                    let motion = by_frame
                        .get(&(scene.name.clone(), frame.index))
                        .with_context(|| format!("no estimate for scene {:?} frame {}", scene.name, frame.index))?;
                    let comp = compensate(&flow, &intr, motion.rotation, config.estimator.mode)?;
                    let seg = rotcomp::segment(&comp, &intr, motion.translation, m, config.threshold)?;
                    let soft = match &prev {
                        Some((s, f)) => evolve_mask(s, &seg.soft, f, DEFAULT_BLEND)?,
                        None => seg.soft,
                    };
                    prev = Some((soft.clone(), flow));
                    soft
                }
            };
            softs.push(soft);
        }
        if a.smooth && !softs.is_empty() {
            softs = temporal_smooth(
                &softs,
                a.sigma_spatial.unwrap_or(DEFAULT_SIGMA_SPATIAL),
                a.sigma_temporal.unwrap_or(DEFAULT_SIGMA_TEMPORAL),
            )?;
        }
        let dir = staged.path().join(&scene.name);
        fs::create_dir(&dir)?;
        for (frame, soft) in scene.frames.iter().zip(&softs) {
            let stem = frame_stem(frame.index);
            let (w, h) = soft.dims();
            let binary: Vec<bool> = soft.data().iter().map(|&v| v > config.threshold).collect();
            write_mask_png(&binary, w, h, &dir.join(format!("{stem}.mask.png")))?;
            write_soft_png(soft, &dir.join(format!("{stem}.soft.png")))?;
            frames_written += 1;
        }
    }
    staged.commit()?;
    println!("wrote masks for {frames_written} frames to {}", a.out.display());
    Ok(())
}
