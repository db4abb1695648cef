use std::fs;
use std::path::PathBuf;

use anyhow::{ensure, Result};
use clap::Args;
use rotcomp::io::write_scene_frame;
use rotcomp::synth::{corpus, generate, sequence, CorpusParams};
use serde::{Deserialize, Serialize};

use crate::inputs::StagedDir;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Directory to create; must not exist.
    pub out: PathBuf,
    /// Number of scenes [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    /// Corpus seed [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Frames per scene [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub frames: Option<usize>,
    /// Image width in pixels [default: 320].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub width: Option<usize>,
    /// Image height in pixels [default: 240].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub height: Option<usize>,
    /// Focal length in pixels [default: 250].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub focal: Option<f64>,
    /// Largest rotation angle per frame, degrees [default: 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_rotation_deg: Option<f64>,
    /// Flow noise standard deviation per axis, as a fraction of the image
    /// diagonal [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_sigma: Option<f64>,
    /// Fewest moving objects per scene [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objects: Option<usize>,
    /// Most moving objects per scene [default: --objects].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objects_max: Option<usize>,
}

pub fn run(a: SynthArgs) -> Result<()> {
    let d = CorpusParams::default();
    let lo = a.objects.unwrap_or(d.objects.0);
    let hi = a.objects_max.unwrap_or(lo);
    ensure!(hi >= lo, "--objects-max {hi} is below --objects {lo}");
    let params = CorpusParams {
        width: a.width.unwrap_or(d.width),
        height: a.height.unwrap_or(d.height),
        focal_length: a.focal.unwrap_or(d.focal_length),
        max_rotation_deg: a.max_rotation_deg.unwrap_or(d.max_rotation_deg),
        noise_sigma: a.noise_sigma.unwrap_or(d.noise_sigma),
        objects: (lo, hi),
        ..d
    };
    let frames = a.frames.unwrap_or(1);
    let specs = corpus(a.n.unwrap_or(1), &params, a.seed.unwrap_or(0))?;

    let staged = StagedDir::new(&a.out)?;
    for (i, spec) in specs.iter().enumerate() {
        let dir = staged.path().join(format!("scene_{i:04}"));
        fs::create_dir(&dir)?;
        for (k, s) in sequence(spec, frames)?.iter().enumerate() {
            write_scene_frame(&dir, k, s, &generate(s)?)?;
        }
    }
    staged.commit()?;
    println!("wrote {} scenes of {frames} frames to {}", specs.len(), a.out.display());
    Ok(())
}
