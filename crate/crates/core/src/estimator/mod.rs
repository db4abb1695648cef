//! Camera-motion estimation by minimizing the weighted negative
//! log-likelihood of rotation-compensated flow.
//!
//! The five free parameters are the rotation `(A, B, C)` and the translation
//! direction as azimuth/elevation in a chart centred on the start direction,
//! so the unit-norm constraint never has to be enforced and the chart's poles
//! stay far from where the search happens.

mod simplex;

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

pub use simplex::{minimize, nelder_mead, SimplexOptions, SimplexResult};

use crate::camera::{CameraIntrinsics, CameraMotion, Rotation, Translation};
use crate::error::{Error, Result};
use crate::field::{FlowField, ScalarMap};
use crate::likelihood::{build_table, LikelihoodModel, LikelihoodTable, TableResolution};
use crate::motion_field::{translational_direction_at, RotationMode, RotationalFlow};

/// Per-pixel estimation weights; 1 is static background, 0 is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionMask {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl MotionMask {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (weights.len(), 1),
            });
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::domain("mask weights must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn uniform(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            weights: vec![1.0; width * height],
        }
    }

    /// Weights `1 - P(moving)` from a soft segmentation.
    pub fn from_moving_probability(soft: &ScalarMap) -> Result<Self> {
        Self::new(
            soft.width(),
            soft.height(),
            soft.data().iter().map(|p| 1.0 - p).collect(),
        )
    }

    /// Zero weight on pixels flagged as moving.
    pub fn from_moving_pixels(width: usize, height: usize, moving: &[bool]) -> Result<Self> {
        Self::new(
            width,
            height,
            moving.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect(),
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.weights[row * self.width + col]
    }

    /// Every weight multiplied by `s` (which must keep them in `[0, 1]`).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.weights.iter().map(|w| w * s).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Every `pixel_stride`-th row and column enters the objective.
    pub pixel_stride: usize,
    /// Simplex iterations per run.
    pub max_iterations: usize,
    /// Convergence threshold on the objective spread over the simplex.
    pub simplex_tolerance: f64,
    /// Look likelihoods up in the table instead of integrating per pixel.
    pub use_table: bool,
    pub mode: RotationMode,
    /// Stride of the cheap first pass each start runs before refinement at
    /// `pixel_stride`. Values at or below `pixel_stride` disable it.
    pub coarse_stride: usize,
    /// Translation directions scored at zero rotation to seed the first
    /// frame. Zero restricts the first frame to the forward start.
    pub first_frame_scan: usize,
    /// Fraction of sampled pixels, best-fitting first, that enter the
    /// objective. Below 1 the objective is a trimmed mean that ignores the
    /// worst-fitting pixels; 1 keeps them all.
    pub keep_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            pixel_stride: 2,
            max_iterations: 500,
            simplex_tolerance: 1e-8,
            use_table: true,
            mode: RotationMode::Approx,
            coarse_stride: 8,
            first_frame_scan: 96,
            keep_fraction: 1.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pixel_stride == 0 {
            return Err(Error::domain("pixel_stride must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        if !(self.simplex_tolerance.is_finite() && self.simplex_tolerance > 0.0) {
            return Err(Error::domain("simplex_tolerance must be positive"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::domain("keep_fraction must be in (0, 1]"));
        }
        Ok(())
    }
}

/// The likelihood model plus an optional precomputed table.
#[derive(Debug, Clone)]
pub struct Models {
    pub likelihood: LikelihoodModel,
    pub table: Option<Arc<LikelihoodTable>>,
}

impl Models {
    pub fn direct(likelihood: LikelihoodModel) -> Self {
        Self {
            likelihood,
            table: None,
        }
    }

    pub fn with_table(likelihood: LikelihoodModel, table: LikelihoodTable) -> Self {
        Self {
            likelihood,
            table: Some(Arc::new(table)),
        }
    }

    /// Builds the lookup table for `likelihood` at `resolution`.
    pub fn tabulated(likelihood: LikelihoodModel, resolution: TableResolution) -> Result<Self> {
        let table = build_table(&likelihood.noise, &likelihood.prior, &likelihood.scheme, resolution)?;
        Ok(Self::with_table(likelihood, table))
    }

    /// Per-pixel log-likelihood, from the table when there is one.
    pub fn log_likelihood(&self, m: f64, cos_dtheta: f64, g: f64) -> f64 {
        match &self.table {
            Some(t) => t.query_cos(m, cos_dtheta, g),
            None => self.likelihood.log_likelihood(m, cos_dtheta, g),
        }
    }

    fn scorer(&self, use_table: bool) -> Result<Scorer<'_>> {
        self.likelihood.validate()?;
        match (use_table, &self.table) {
            (true, Some(t)) => Ok(Scorer::Table(t)),
            (true, None) => Err(Error::domain("use_table is set but no table was supplied")),
            (false, _) => Ok(Scorer::Direct(&self.likelihood)),
        }
    }
}

#[derive(Clone, Copy)]
enum Scorer<'a> {
    Table(&'a LikelihoodTable),
    Direct(&'a LikelihoodModel),
}

impl Scorer<'_> {
    #[inline]
    fn log_likelihood(&self, m: f64, c: f64, g: f64) -> f64 {
        match self {
            Scorer::Table(t) => t.query_cos(m, c, g),
            Scorer::Direct(model) => model.log_likelihood(m, c, g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub motion: CameraMotion,
    pub nll: f64,
    /// Which start (1, 2 or 3) produced the returned optimum.
    pub start_point_used: usize,
    /// Flow too small to identify the translation; only rotation is meaningful.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    x: f64,
    y: f64,
    /// Observed flow in pixels.
    o: [f64; 2],
    w: f64,
}

/// The pixels entering one objective.
struct Samples {
    focal_length: f64,
    normalizer: f64,
    pts: Vec<Sample>,
    total_weight: f64,
}

impl Samples {
    fn collect(
        observed: &FlowField,
        intr: &CameraIntrinsics,
        mask: &MotionMask,
        stride: usize,
        normalizer: f64,
    ) -> Result<Self> {
        let mut pts = Vec::new();
        let mut total_weight = 0.0;
        for row in (0..intr.height).step_by(stride) {
            for col in (0..intr.width).step_by(stride) {
                let w = mask.get(col, row);
                if w > 0.0 {
                    let (x, y) = intr.offset(col, row);
                    pts.push(Sample {
                        x,
                        y,
                        o: observed.get(col, row),
                        w,
                    });
                    total_weight += w;
                }
            }
        }
        if !(total_weight > 0.0) {
            return Err(Error::Degenerate("mask has zero total weight"));
        }
        Ok(Self {
            focal_length: intr.focal_length,
            normalizer,
            pts,
            total_weight,
        })
    }

    /// Weighted mean negative log-likelihood over the best-fitting
    /// `keep` fraction of samples; infinite outside the domain.
    fn objective(&self, rot: Rotation, trans: Translation, mode: RotationMode, scorer: Scorer, keep: f64) -> f64 {
        if [rot.a, rot.b, rot.c].iter().any(|v| !(v.abs() < FRAC_PI_2)) {
            return f64::INFINITY;
        }
        let rf = RotationalFlow::new(rot, mode);
        let f = self.focal_length;
        let inv_n = 1.0 / self.normalizer;
        let trimmed = keep < 1.0;
        let mut terms = Vec::with_capacity(if trimmed { self.pts.len() } else { 0 });
        let mut sum = 0.0;
        for s in &self.pts {
            let Some(vr) = rf.at(f, s.x, s.y) else {
                return f64::INFINITY;
            };
            let ot = [(s.o[0] - vr[0]) * inv_n, (s.o[1] - vr[1]) * inv_n];
            let d = translational_direction_at(f, s.x, s.y, trans);
            // No overflow risk at flow scales, so skip `hypot`; it dominates
            // the per-pixel cost otherwise.
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let m = (ot[0] * ot[0] + ot[1] * ot[1]).sqrt();
            let c = if m > 0.0 && len > 0.0 {
                ((ot[0] * d[0] + ot[1] * d[1]) / (m * len)).clamp(-1.0, 1.0)
            } else {
                1.0
            };
            let nll = -scorer.log_likelihood(m, c, len * inv_n);
            if trimmed {
                terms.push((nll, s.w));
            } else {
                sum += s.w * nll;
            }
        }
        if !trimmed {
            return sum / self.total_weight;
        }
        let k = ((keep * terms.len() as f64).ceil() as usize).clamp(1, terms.len());
        terms.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let (sum, weight) = terms[..k].iter().fold((0.0, 0.0), |(s, w), t| (s + t.1 * t.0, w + t.1));
        sum / weight
    }
}

/// Weighted mean of `-log p(o - v_r | U,V,W,x,y)` over the sampled pixels,
/// normalized by the total weight.
pub fn weighted_nll(
    observed: &FlowField,
    intr: &CameraIntrinsics,
    motion: &CameraMotion,
    mask: &MotionMask,
    models: &Models,
    config: &EstimatorConfig,
) -> Result<f64> {
    check_inputs(observed, intr, mask, config)?;
    motion.validate()?;
    let scorer = models.scorer(config.use_table)?;
    let samples = Samples::collect(
        observed,
        intr,
        mask,
        config.pixel_stride,
        models.likelihood.noise.flow_normalizer,
    )?;
    Ok(samples.objective(motion.rotation, motion.translation, config.mode, scorer, config.keep_fraction))
}

fn check_inputs(
    observed: &FlowField,
    intr: &CameraIntrinsics,
    mask: &MotionMask,
    config: &EstimatorConfig,
) -> Result<()> {
    intr.validate()?;
    config.validate()?;
    observed.ensure_dims(intr.dims())?;
    if mask.dims() != intr.dims() {
        return Err(Error::DimensionMismatch {
            expected: intr.dims(),
            actual: mask.dims(),
        });
    }
    if !observed.is_finite() {
        return Err(Error::NonFinite("observed flow"));
    }
    Ok(())
}

/// Orthonormal frame whose first axis is a given direction.
#[derive(Debug, Clone, Copy)]
struct Chart {
    t0: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

impl Chart {
    fn centred_on(t: Translation) -> Self {
        let t0 = Vector3::new(t.u, t.v, t.w);
        let helper = if t0.x.abs() <= t0.y.abs() && t0.x.abs() <= t0.z.abs() {
            Vector3::x()
        } else if t0.y.abs() <= t0.z.abs() {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let e1 = t0.cross(&helper).normalize();
        let e2 = t0.cross(&e1);
        Self { t0, e1, e2 }
    }

    /// Direction at azimuth `az` and elevation `el`; `(0, 0)` is the centre.
    fn direction(&self, az: f64, el: f64) -> Translation {
        let v = self.t0 * (el.cos() * az.cos()) + self.e1 * (el.cos() * az.sin()) + self.e2 * el.sin();
        let v = v.normalize();
        Translation {
            u: v.x,
            v: v.y,
            w: v.z,
        }
    }
}

const ROTATION_STEP: f64 = 0.5 * std::f64::consts::PI / 180.0;
const ANGLE_STEP: f64 = 0.1;

/// Parameter resolution at which a descent stops even if the objective is
/// still changing (radians for rotation, chart angle for translation). The
/// screening pass only has to land in the right basin.
const SCREEN_RESOLUTION: f64 = 1e-6;
const REFINE_RESOLUTION: f64 = 1e-7;

/// One simplex descent over (rotation, translation chart) from `from`.
fn descend(
    samples: &Samples,
    from: CameraMotion,
    rot_step: f64,
    ang_step: f64,
    resolution: f64,
    scorer: Scorer,
    config: &EstimatorConfig,
) -> (CameraMotion, f64) {
    let opts = SimplexOptions {
        tolerance: config.simplex_tolerance,
        x_tolerance: resolution,
        max_iterations: config.max_iterations,
        max_restarts: 4,
    };
    let chart = Chart::centred_on(from.translation);
    let r = minimize(
        |p: &[f64; 5]| {
            samples.objective(
                Rotation::new(p[0], p[1], p[2]),
                chart.direction(p[3], p[4]),
                config.mode,
                scorer,
                config.keep_fraction,
            )
        },
        [from.rotation.a, from.rotation.b, from.rotation.c, 0.0, 0.0],
        [rot_step, rot_step, rot_step, ang_step, ang_step],
        opts,
    );
    let motion = CameraMotion {
        rotation: Rotation::new(r.x[0], r.x[1], r.x[2]),
        translation: chart.direction(r.x[3], r.x[4]),
    };
    (motion, r.value)
}

/// Scales the rotation start by how much of the inverse-depth mass lies in
/// the far field (proxy at or below its median): 1 for fronto-parallel
/// scenes, smaller when near-field parallax dominates.
fn far_field_scale(proxy: &ScalarMap) -> f64 {
    let mut vals: Vec<f64> = proxy.data().iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
    if vals.is_empty() {
        return 1.0;
    }
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let total: f64 = vals.iter().sum();
    let far: f64 = vals.iter().filter(|&&v| v <= median).sum();
    (2.0 * far / total).clamp(0.0, 1.0)
}

/// Roughly evenly spread unit vectors (Fibonacci lattice).
fn sphere_directions(n: usize) -> Vec<Translation> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Translation {
                u: r * phi.cos(),
                v: r * phi.sin(),
                w: z,
            }
        })
        .collect()
}

/// Weighted least-squares rotation under the small-angle model, ignoring
/// translation. Used when the flow is too weak to constrain translation.
fn rotation_only_fit(samples: &Samples) -> Rotation {
    let f = samples.focal_length;
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for s in &samples.pts {
        let (x, y) = (s.x, s.y);
        // Columns are d(u, v)/dA, d/dB, d/dC of the small-angle flow.
        let ju = Vector3::new(x * y / f, -f - x * x / f, y);
        let jv = Vector3::new(f + y * y / f, -x * y / f, -x);
        ata += s.w * (ju * ju.transpose() + jv * jv.transpose());
        atb += s.w * (ju * s.o[0] + jv * s.o[1]);
    }
    match ata.cholesky() {
        Some(ch) => {
            let sol = ch.solve(&atb);
            Rotation::new(sol.x, sol.y, sol.z)
        }
        None => Rotation::ZERO,
    }
}

/// Up-to-scale inverse depth `|o_t| / g` from rotation-compensated flow,
/// with `g` the unnormalized translational geometry factor. Zero where `g`
/// vanishes (the focus of expansion).
pub fn inverse_depth_proxy(
    compensated: &FlowField,
    intr: &CameraIntrinsics,
    trans: Translation,
) -> Result<ScalarMap> {
    intr.validate()?;
    trans.validate()?;
    compensated.ensure_dims(intr.dims())?;
    let f = intr.focal_length;
    let eps = 1e-9 * f;
    Ok(ScalarMap::from_fn(intr.width, intr.height, |col, row| {
        let (x, y) = intr.offset(col, row);
        let d = translational_direction_at(f, x, y, trans);
        let g = d[0].hypot(d[1]);
        if g > eps {
            let o = compensated.get(col, row);
            o[0].hypot(o[1]) / g
        } else {
            0.0
        }
    }))
}

/// Fraction of sampled pixels whose flow is below `3σ` for the flow to be
/// considered uninformative about translation.
const DEGENERATE_FRACTION: f64 = 0.99;

/// Estimates the camera motion for one frame pair.
///
/// With a previous estimate, three starts are refined: the previous motion,
/// the previous rotation attenuated by [`far_field_scale`] of
/// `prev_depth_proxy`, and that rotation with the translation reversed.
/// Without one, the first frame is seeded from the forward direction plus the
/// best few of `config.first_frame_scan` directions scored at zero rotation.
pub fn estimate(
    observed: &FlowField,
    intr: &CameraIntrinsics,
    prev: Option<&EstimateResult>,
    prev_depth_proxy: Option<&ScalarMap>,
    mask: &MotionMask,
    models: &Models,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    check_inputs(observed, intr, mask, config)?;
    let scorer = models.scorer(config.use_table)?;
    let normalizer = models.likelihood.noise.flow_normalizer;
    let fine = Samples::collect(observed, intr, mask, config.pixel_stride, normalizer)?;

    let sigma_px = models.likelihood.noise.sigma_pixels();
    let mut small = 0usize;
    let mut sampled = 0usize;
    for row in (0..intr.height).step_by(config.pixel_stride) {
        for col in (0..intr.width).step_by(config.pixel_stride) {
            let o = observed.get(col, row);
            sampled += 1;
            if o[0].hypot(o[1]) < 3.0 * sigma_px {
                small += 1;
            }
        }
    }
    if small as f64 >= DEGENERATE_FRACTION * sampled as f64 {
        let rotation = rotation_only_fit(&fine);
        let translation = prev.map_or(Translation::FORWARD, |p| p.motion.translation);
        let nll = fine.objective(rotation, translation, config.mode, scorer, config.keep_fraction);
        return Ok(EstimateResult {
            motion: CameraMotion {
                rotation,
                translation,
            },
            nll,
            start_point_used: 1,
            degenerate: true,
        });
    }

    let coarse = if config.coarse_stride > config.pixel_stride {
        Some(Samples::collect(observed, intr, mask, config.coarse_stride, normalizer)?)
    } else {
        None
    };
    let screen = coarse.as_ref().unwrap_or(&fine);

    // (start index reported, start motion)
    let mut starts: Vec<(usize, CameraMotion)> = Vec::new();
    match prev {
        Some(p) => {
            let scale = prev_depth_proxy.map_or(1.0, far_field_scale);
            let attenuated = p.motion.rotation.scaled(scale);
            starts.push((1, p.motion));
            starts.push((
                2,
                CameraMotion {
                    rotation: attenuated,
                    translation: p.motion.translation,
                },
            ));
            starts.push((
                3,
                CameraMotion {
                    rotation: attenuated,
                    translation: p.motion.translation.negated(),
                },
            ));
        }
        None => {
            starts.push((1, CameraMotion::default()));
            let mut scored: Vec<(f64, Translation)> = sphere_directions(config.first_frame_scan)
                .into_iter()
                .map(|t| (screen.objective(Rotation::ZERO, t, config.mode, scorer, config.keep_fraction), t))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (_, t) in scored.into_iter().take(3) {
                starts.push((
                    1,
                    CameraMotion {
                        rotation: Rotation::ZERO,
                        translation: t,
                    },
                ));
            }
        }
    }
    starts.dedup_by(|a, b| a.1 == b.1);

    // Every start is descended on the screening samples; only the winner is
    // refined at full stride.
    let mut best: Option<(usize, CameraMotion, f64)> = None;
    for (index, start) in starts {
        let (motion, nll) = descend(screen, start, ROTATION_STEP, ANGLE_STEP, SCREEN_RESOLUTION, scorer, config);
        if best.is_none_or(|b| nll < b.2) {
            best = Some((index, motion, nll));
        }
    }
    let (index, mut motion, mut nll) = best.expect("at least one start");
    if coarse.is_some() {
        let (rot_step, ang_step) = (0.02 * ROTATION_STEP, 0.02 * ANGLE_STEP);
        (motion, nll) = descend(&fine, motion, rot_step, ang_step, REFINE_RESOLUTION, scorer, config);
    }
    Ok(EstimateResult {
        motion,
        nll,
        start_point_used: index,
        degenerate: false,
    })
}
