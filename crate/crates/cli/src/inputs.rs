//! Locating frames, intrinsics and likelihood models for the commands that
//! read flow, and staging output directories.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use rotcomp::io::{list_flo_files, read_flo, read_frame_spec, read_table, scene_dirs, FRAME_SPEC_EXT};
use rotcomp::{
    CameraIntrinsics, FlowField, IntegrationScheme, InverseDepthPrior, LikelihoodModel, LikelihoodTable, Models,
    NoiseModel, PipelineConfig, RotationMode, TableResolution,
};
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

/// One flow file of a scene, with the frame number taken from its name.
#[derive(Debug, Clone)]
pub struct FrameFile {
    pub index: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub frames: Vec<FrameFile>,
}

/// Trailing digits of the file stem, e.g. 3 for `frame_0003.flo`.
pub fn frame_number(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().rev().take_while(char::is_ascii_digit).collect();
    digits.chars().rev().collect::<String>().parse().ok()
}

/// The scenes under `root`: `root` itself if it holds `.flo` files,
/// otherwise each subdirectory that does.
pub fn scenes(root: &Path) -> Result<Vec<Scene>> {
    ensure!(root.is_dir(), "{} is not a directory", root.display());
    scene_dirs(root)?
        .into_iter()
        .map(|dir| {
            let name = dir
                .canonicalize()?
                .file_name()
                .map_or_else(|| ".".to_string(), |n| n.to_string_lossy().into_owned());
            let frames = list_flo_files(&dir)?
                .into_iter()
                .enumerate()
                .map(|(i, path)| FrameFile { index: frame_number(&path).unwrap_or(i), path })
                .collect();
            Ok(Scene { name, frames })
        })
        .collect()
}

/// Intrinsics from the frame's scene file next to the flow, or a centred
/// principal point with `focal` when there is none.
pub fn intrinsics(flow_path: &Path, flow: &FlowField, focal: Option<f64>) -> Result<CameraIntrinsics> {
    let spec_path = flow_path.with_extension(FRAME_SPEC_EXT);
    let intr = if spec_path.is_file() {
        read_frame_spec(&spec_path)?.intr
    } else if let Some(f) = focal {
        CameraIntrinsics::centered(f, flow.width(), flow.height())?
    } else {
        bail!("{}: no scene file {} and no --focal given", flow_path.display(), spec_path.display());
    };
    ensure!(
        intr.dims() == flow.dims(),
        "{}: flow is {:?} but the intrinsics describe {:?}",
        flow_path.display(),
        flow.dims(),
        intr.dims()
    );
    Ok(intr)
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    read_flo(path).with_context(|| format!("reading {}", path.display()))
}

/// Model choice shared by the commands that score flow.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Lookup table from `rotcomp table`; its `.toml` sidecar supplies the model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub table: Option<PathBuf>,
    /// Noise variance per axis in normalized flow units [default: 16.5e-5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_variance: Option<f64>,
    /// Rate of the exponential inverse-depth prior [default: 0.64].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate: Option<f64>,
    /// Nodes per axis of the table built in memory when no --table is given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resolution: Option<usize>,
    /// Integrate the likelihood per pixel instead of using a table.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub direct: bool,
}

/// What `rotcomp table` records next to a table file. The values do not
/// depend on the flow normalizer, so each image supplies its own diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSidecar {
    pub covariance_scale: f64,
    pub prior: InverseDepthPrior,
    pub scheme: IntegrationScheme,
    pub resolution: TableResolution,
}

impl TableSidecar {
    fn model(&self, intr: &CameraIntrinsics) -> Result<LikelihoodModel> {
        let model = LikelihoodModel {
            noise: NoiseModel::new(self.covariance_scale, intr.diagonal())?,
            prior: self.prior,
            scheme: self.scheme,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn sidecar_path(table: &Path) -> PathBuf {
    let mut name = table.as_os_str().to_owned();
    name.push(".toml");
    PathBuf::from(name)
}

/// Builds models on demand, once per flow normalizer.
pub struct ModelCache {
    args: ModelArgs,
    loaded: Option<(TableSidecar, Arc<LikelihoodTable>)>,
    built: HashMap<u64, Models>,
}

impl ModelCache {
    pub fn new(args: ModelArgs) -> Result<Self> {
        let loaded = match &args.table {
            Some(path) => {
                ensure!(
                    args.noise_variance.is_none() && args.rate.is_none() && args.resolution.is_none() && !args.direct,
                    "--table fixes the model; drop --noise-variance, --rate, --resolution and --direct"
                );
                let side = sidecar_path(path);
                let text = fs::read_to_string(&side).with_context(|| format!("reading {}", side.display()))?;
                let meta: TableSidecar = toml::from_str(&text).with_context(|| format!("parsing {}", side.display()))?;
                let table = read_table(path).with_context(|| format!("reading {}", path.display()))?;
                Some((meta, Arc::new(table)))
            }
            None => None,
        };
        Ok(Self { args, loaded, built: HashMap::new() })
    }

    pub fn get(&mut self, intr: &CameraIntrinsics) -> Result<&Models> {
        let key = intr.diagonal().to_bits();
        if !self.built.contains_key(&key) {
            let models = match &self.loaded {
                Some((meta, table)) => Models { likelihood: meta.model(intr)?, table: Some(table.clone()) },
                None => {
                    let mut model = LikelihoodModel::for_intrinsics(intr);
                    if let Some(v) = self.args.noise_variance {
                        model.noise.covariance_scale = v;
                    }
                    if let Some(r) = self.args.rate {
                        model.prior = InverseDepthPrior::new(r)?;
                    }
                    model.validate()?;
                    if self.args.direct {
                        Models::direct(model)
                    } else {
                        let n = self.args.resolution.unwrap_or(TableResolution::default().n_m);
                        Models::tabulated(model, TableResolution { n_m: n, n_dtheta: n, n_g: n })?
                    }
                }
            };
            self.built.insert(key, models);
        }
        Ok(&self.built[&key])
    }

    /// Whether scoring should go through a table.
    pub fn tabulated(&self) -> bool {
        !self.args.direct
    }
}

/// A directory filled in a temporary sibling and renamed into place, so
/// readers never see a half-written result.
pub struct StagedDir {
    tmp: TempDir,
    target: PathBuf,
}

impl StagedDir {
    pub fn new(target: &Path) -> Result<Self> {
        ensure!(!target.exists(), "{} already exists", target.display());
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        ensure!(parent.is_dir(), "{} does not exist", parent.display());
        let tmp = tempfile::Builder::new()
            .prefix(".rotcomp-")
            .tempdir_in(parent)
            .with_context(|| format!("creating a staging directory in {}", parent.display()))?;
        Ok(Self { tmp, target: target.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn commit(self) -> Result<()> {
        let staged = self.tmp.keep();
        if let Err(e) = fs::rename(&staged, &self.target) {
            let _ = fs::remove_dir_all(&staged);
            return Err(e).with_context(|| format!("moving output to {}", self.target.display()));
        }
        Ok(())
    }
}

/// Estimator settings shared by the commands that estimate motion.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EstimatorArgs {
    /// Use every n-th row and column in the objective [default: 2].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stride: Option<usize>,
    /// Simplex iterations per start [default: 500].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_iterations: Option<usize>,
    /// Rotational flow model: approx or exact [default: approx].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<RotationMode>,
    /// Focal length in pixels for flow without a scene file; the principal
    /// point is the image centre.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub focal: Option<f64>,
}

impl EstimatorArgs {
    pub fn pipeline(&self, models: &ModelCache) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        let e = &mut config.estimator;
        e.pixel_stride = self.stride.unwrap_or(e.pixel_stride);
        e.max_iterations = self.max_iterations.unwrap_or(e.max_iterations);
        e.mode = self.mode.unwrap_or(e.mode);
        e.use_table = models.tabulated();
        e.validate()?;
        Ok(config)
    }
}
