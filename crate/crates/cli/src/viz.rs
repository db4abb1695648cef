use std::path::PathBuf;

use anyhow::{ensure, Result};
use clap::Args;
use rotcomp::io::{flow_to_color, write_color_png};
use serde::{Deserialize, Serialize};

use crate::inputs::read_flow;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct VizArgs {
    /// Flow file to colour.
    pub flow: PathBuf,
    /// PNG file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Magnitude in pixels shown at full saturation [default: the 99th
    /// percentile of the frame].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_magnitude: Option<f64>,
}

pub fn run(a: VizArgs) -> Result<()> {
    if let Some(m) = a.max_magnitude {
        ensure!(m.is_finite() && m > 0.0, "--max-magnitude must be positive");
    }
    let flow = read_flow(&a.flow)?;
    write_color_png(&flow_to_color(&flow, a.max_magnitude), &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
