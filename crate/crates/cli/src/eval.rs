use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use rotcomp::io::{frame_stem, read_estimates, read_frame_spec, read_mask_png, write_report, FRAME_SPEC_EXT};
use rotcomp::{iou, rotation_error, RotationErrorReport};
use serde::{Deserialize, Serialize};

use crate::inputs::scenes;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Ground-truth scenes from `rotcomp synth`.
    pub truth: PathBuf,
    /// Estimates CSV from `rotcomp estimate`.
    #[arg(long)]
    pub estimates: PathBuf,
    /// Mask directory from `rotcomp segment`, scored by IoU.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub masks: Option<PathBuf>,
    /// Per-frame report CSV, ending with a row of means.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct Row {
    scene: String,
    frame: Option<usize>,
    err_a_deg: f64,
    err_b_deg: f64,
    err_c_deg: f64,
    err_translation_deg: f64,
    iou: Option<f64>,
}

fn mask_iou(dir: &Path, scene: &str, truth_flow: &Path, frame: usize) -> Result<f64> {
    let pred_path = dir.join(scene).join(format!("{}.mask.png", frame_stem(frame)));
    let gt_path = truth_flow.with_extension("mask.png");
    let (pred, pw, ph) = read_mask_png(&pred_path).with_context(|| format!("reading {}", pred_path.display()))?;
    let (gt, gw, gh) = read_mask_png(&gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
    ensure!((pw, ph) == (gw, gh), "{} is {pw}x{ph} but the truth is {gw}x{gh}", pred_path.display());
    Ok(iou(&pred, &gt)?)
}

pub fn run(a: EvalArgs) -> Result<()> {
    let mut truth = HashMap::new();
    for scene in scenes(&a.truth)? {
        for f in scene.frames {
            truth.insert((scene.name.clone(), f.index), f.path);
        }
    }
    let records = read_estimates(&a.estimates).with_context(|| format!("reading {}", a.estimates.display()))?;
    ensure!(!records.is_empty(), "{} has no estimates", a.estimates.display());

    let mut rows = Vec::with_capacity(records.len() + 1);
    let mut errors = Vec::with_capacity(records.len());
    let mut ious = Vec::new();
    for r in &records {
        let flow_path = truth
            .get(&(r.scene.clone(), r.frame))
            .with_context(|| format!("no ground truth for scene {:?} frame {}", r.scene, r.frame))?;
        let spec = read_frame_spec(&flow_path.with_extension(FRAME_SPEC_EXT))?;
        let e = rotation_error(&r.motion()?, &spec.motion);
        let score = match &a.masks {
            Some(dir) => Some(mask_iou(dir, &r.scene, flow_path, r.frame)?),
            None => None,
        };
        ious.extend(score);
        errors.push(e);
        rows.push(Row {
            scene: r.scene.clone(),
            frame: Some(r.frame),
            err_a_deg: e.axes_deg[0],
            err_b_deg: e.axes_deg[1],
            err_c_deg: e.axes_deg[2],
            err_translation_deg: e.translation_deg,
            iou: score,
        });
    }
    let report = RotationErrorReport::new(errors)?;
    let mean_iou = (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64);
    let m = report.mean;
    rows.push(Row {
        scene: "mean".into(),
        frame: None,
        err_a_deg: m.axes_deg[0],
        err_b_deg: m.axes_deg[1],
        err_c_deg: m.axes_deg[2],
        err_translation_deg: m.translation_deg,
        iou: mean_iou,
    });
    if let Some(out) = &a.out {
        write_report(&rows, out)?;
    }

    let worst = report.frames.iter().map(|e| e.max_axis()).fold(0.0, f64::max);
    println!("frames: {}", report.frames.len());
    println!(
        "mean rotation error (deg): a {:.4} b {:.4} c {:.4}; worst axis {:.4}",
        m.axes_deg[0], m.axes_deg[1], m.axes_deg[2], worst
    );
    println!("mean translation error (deg): {:.4}", m.translation_deg);
    if let Some(v) = mean_iou {
        println!("mean mask IoU: {v:.4}");
    }
    Ok(())
}
