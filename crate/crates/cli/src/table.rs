use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use rotcomp::io::{read_frame_spec, read_pfm, write_atomic, write_table, FRAME_SPEC_EXT};
use rotcomp::likelihood::{build_table, calibrate_depth_prior, measure_noise_variance};
use rotcomp::synth::generate;
use rotcomp::{IntegrationScheme, InverseDepthPrior, NoiseModel, TableResolution};
use serde::{Deserialize, Serialize};

use crate::inputs::{read_flow, scenes, sidecar_path, TableSidecar};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TableArgs {
    /// Table file to write; `<OUT>.toml` records the model it was built with.
    pub out: PathBuf,
    /// Nodes per axis [default: 64].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resolution: Option<usize>,
    /// Noise variance per axis in normalized flow units [default: 16.5e-5,
    /// or measured with --calibrate].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_variance: Option<f64>,
    /// Inverse-depth prior rate [default: 0.64, or measured with --calibrate].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate: Option<f64>,
    /// Scene directory (from `rotcomp synth`) to measure the noise variance
    /// and prior rate on, from its ground-truth depth and motion.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub calibrate: Option<PathBuf>,
}

/// Noise variance and prior rate measured on a synthetic corpus.
fn calibrate(root: &Path) -> Result<(f64, f64)> {
    let mut depths = Vec::new();
    let (mut sum, mut count) = (0.0, 0usize);
    for scene in scenes(root)? {
        for frame in &scene.frames {
            let spec_path = frame.path.with_extension(FRAME_SPEC_EXT);
            let spec = read_frame_spec(&spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
            let observed = read_flow(&frame.path)?;
            let truth = generate(&spec)?;
            let n = observed.data().len();
            sum += n as f64 * measure_noise_variance(&[truth.gt_flow], &[observed], spec.intr.diagonal())?;
            count += n;
            let depth_path = frame.path.with_extension("depth.pfm");
            depths.push(read_pfm(&depth_path).with_context(|| format!("reading {}", depth_path.display()))?);
        }
    }
    ensure!(count > 0, "no frames under {}", root.display());
    // Noiseless corpora measure zero; floor it so the model stays valid.
    Ok(((sum / count as f64).max(1e-12), calibrate_depth_prior(&depths)?.rate))
}

pub fn run(a: TableArgs) -> Result<()> {
    let measured = a.calibrate.as_deref().map(calibrate).transpose()?;
    let var = a
        .noise_variance
        .or(measured.map(|m| m.0))
        .unwrap_or(NoiseModel::DEFAULT_COVARIANCE_SCALE);
    let rate = a.rate.or(measured.map(|m| m.1)).unwrap_or(InverseDepthPrior::DEFAULT_RATE);
    let n = a.resolution.unwrap_or(TableResolution::default().n_m);
    let meta = TableSidecar {
        covariance_scale: var,
        prior: InverseDepthPrior::new(rate)?,
        scheme: IntegrationScheme::default(),
        resolution: TableResolution { n_m: n, n_dtheta: n, n_g: n },
    };
    // The normalizer does not enter the tabulated values.
    let table = build_table(&NoiseModel::new(var, 1.0)?, &meta.prior, &meta.scheme, meta.resolution)?;
    write_table(&table, &a.out)?;
    write_atomic(&sidecar_path(&a.out), toml::to_string(&meta)?.as_bytes())?;
    println!("wrote {n}^3 table to {} (noise variance {var:e}, prior rate {rate})", a.out.display());
    Ok(())
}
