use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rotcomp::io::{read_estimates, write_flo};
use rotcomp::{compensate, Rotation};
use serde::{Deserialize, Serialize};

use crate::inputs::{intrinsics, read_flow};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CompensateArgs {
    /// Flow file to compensate.
    pub flow: PathBuf,
    /// `.flo` file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Rotation to remove as `a,b,c` in degrees about x, y and z.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true, conflicts_with = "estimates")]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rotation_deg: Option<Vec<f64>>,
    /// Estimates CSV to take the rotation from.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimates: Option<PathBuf>,
    /// Scene name of the row to use [default: the flow file's directory name].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scene: Option<String>,
    /// Frame number of the row to use [default: from the flow file name].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub frame: Option<usize>,
    /// Focal length in pixels when there is no scene file next to the flow.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub focal: Option<f64>,
    /// Rotational flow model: approx or exact [default: approx].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<rotcomp::RotationMode>,
}

fn rotation(a: &CompensateArgs) -> Result<Rotation> {
    if let Some(r) = &a.rotation_deg {
        let [x, y, z] = r[..] else {
            bail!("--rotation-deg takes three values, got {}", r.len());
        };
        return Ok(Rotation::from_degrees(x, y, z));
    }
    let Some(csv) = &a.estimates else {
        bail!("give --rotation-deg or --estimates");
    };
    let scene = match &a.scene {
        Some(s) => s.clone(),
        None => a
            .flow
            .canonicalize()?
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let frame = match a.frame {
        Some(f) => f,
        None => crate::inputs::frame_number(&a.flow)
            .with_context(|| format!("no frame number in {}; give --frame", a.flow.display()))?,
    };
    let rows = read_estimates(csv).with_context(|| format!("reading {}", csv.display()))?;
    let Some(row) = rows.iter().find(|r| r.scene == scene && r.frame == frame) else {
        bail!("{} has no row for scene {scene:?} frame {frame}", csv.display());
    };
    Ok(row.motion()?.rotation)
}

pub fn run(a: CompensateArgs) -> Result<()> {
    let rot = rotation(&a)?;
    let flow = read_flow(&a.flow)?;
    let intr = intrinsics(&a.flow, &flow, a.focal)?;
    let out = compensate(&flow, &intr, rot, a.mode.unwrap_or_default())?;
    write_flo(&out, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
