//! Seeded synthetic scenes with known depth, camera motion, moving objects
//! and flow noise.
//!
//! Flow noise is specified in normalized units; the pixel standard deviation
//! is `noise_sigma * diagonal`, matching [`NoiseModel::for_intrinsics`].
//!
//! [`NoiseModel::for_intrinsics`]: crate::likelihood::NoiseModel::for_intrinsics

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraMotion, Rotation, Translation};
use crate::error::{Error, Result};
use crate::field::{DepthMap, FlowField, FlowKind};
use crate::motion_field::{
    rotational_flow, translational_direction_at, translational_flow, RotationMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthModel {
    Constant { z: f64 },
    /// Depth varying linearly from the top row to the bottom row.
    Ramp { z_top: f64, z_bottom: f64 },
    /// Smooth field whose inverse depth at every pixel is exponentially
    /// distributed with rate `inverse_depth_rate`, clamped to
    /// `[1/z_max, 1/z_min]`. Built as `(X² + Y²) / (2·rate)` from two smooth
    /// unit-variance Gaussian fields, each a bilinear upsampling of a seeded
    /// `grid[0] × grid[1]` lattice rescaled so the variance stays 1 between
    /// nodes. Interpolating inverse depths directly would thin out the
    /// near-zero tail, so the marginal would no longer match the prior.
    SmoothRandom {
        z_min: f64,
        z_max: f64,
        grid: [usize; 2],
        inverse_depth_rate: f64,
    },
}

impl DepthModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |z: f64| z.is_finite() && z > 0.0;
        match *self {
            DepthModel::Constant { z } if ok(z) => Ok(()),
            DepthModel::Ramp { z_top, z_bottom } if ok(z_top) && ok(z_bottom) => Ok(()),
            DepthModel::SmoothRandom {
                z_min,
                z_max,
                grid,
                inverse_depth_rate,
            } if ok(z_min)
                && ok(z_max)
                && z_min <= z_max
                && grid[0] >= 2
                && grid[1] >= 2
                && ok(inverse_depth_rate) =>
            {
                Ok(())
            }
            other => Err(Error::domain(format!("invalid depth model {other:?}"))),
        }
    }
}

/// A rectangle of pixels moving with its own image-plane velocity on top of
/// the camera-induced flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingObject {
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
    /// Pixels per frame.
    pub velocity: [f64; 2],
}

impl MovingObject {
    #[inline]
    pub fn contains(&self, col: usize, row: usize) -> bool {
        col >= self.col && col < self.col + self.width && row >= self.row && row < self.row + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row..self.row + self.height)
            .flat_map(move |r| (self.col..self.col + self.width).map(move |c| (c, r)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub intr: CameraIntrinsics,
    pub motion: CameraMotion,
    pub depth_model: DepthModel,
    #[serde(default)]
    pub objects: Vec<MovingObject>,
    /// Per-axis flow-noise standard deviation, normalized units.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Position within a sequence; frames share depth but draw independent noise.
    #[serde(default)]
    pub frame: u64,
    #[serde(default)]
    pub rotation_mode: RotationMode,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.intr.validate()?;
        self.motion.validate()?;
        self.depth_model.validate()?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::domain("noise_sigma must be non-negative"));
        }
        for o in &self.objects {
            if o.width == 0
                || o.height == 0
                || o.col + o.width > self.intr.width
                || o.row + o.height > self.intr.height
            {
                return Err(Error::domain(format!("object {o:?} outside the image")));
            }
            if !(o.velocity[0].is_finite() && o.velocity[1].is_finite()) {
                return Err(Error::NonFinite("object velocity"));
            }
        }
        Ok(())
    }

    /// Noise standard deviation in pixels.
    pub fn noise_sigma_pixels(&self) -> f64 {
        self.noise_sigma * self.intr.diagonal()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub gt_flow: FlowField,
    pub gt_rotational: FlowField,
    pub gt_translational: FlowField,
    pub noisy_flow: FlowField,
    /// Row-major, true on moving-object pixels.
    pub gt_mask: Vec<bool>,
    pub depth: DepthMap,
    pub motion: CameraMotion,
}

const DEPTH_STREAM: u64 = 0;
/// Noise for frame `k` uses stream `NOISE_STREAM + k`.
const NOISE_STREAM: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The scene's depth: the background model with each object drawn as a
/// fronto-parallel plate (see [`plate_depth`]). Where objects overlap the
/// first one listed is in front. Deterministic in the scene seed.
pub fn depth_map(spec: &SceneSpec) -> Result<DepthMap> {
    let background = background_depth(spec)?;
    if spec.objects.is_empty() {
        return Ok(background);
    }
    let (w, h) = spec.intr.dims();
    let mut map = background.map().clone();
    let mut claimed = vec![false; w * h];
    for obj in &spec.objects {
        let z = plate_depth(&background, obj);
        for (col, row) in obj.pixels() {
            if !std::mem::replace(&mut claimed[row * w + col], true) {
                map.set(col, row, z);
            }
        }
    }
    DepthMap::new(map)
}

/// Depth of an object's plate: the harmonic mean of the background depth
/// it covers, so its mean inverse depth matches what it occludes. A plate
/// keeps the object's flow coherent, so it moves as one piece.
pub fn plate_depth(background: &DepthMap, obj: &MovingObject) -> f64 {
    let inv: f64 = obj.pixels().map(|(c, r)| 1.0 / background.get(c, r)).sum();
    obj.area() as f64 / inv
}

/// The depth model alone, without objects.
pub fn background_depth(spec: &SceneSpec) -> Result<DepthMap> {
    spec.depth_model.validate()?;
    let (w, h) = spec.intr.dims();
    match spec.depth_model {
        DepthModel::Constant { z } => DepthMap::constant(w, h, z),
        DepthModel::Ramp { z_top, z_bottom } => DepthMap::from_fn(w, h, |_, row| {
            z_top + (z_bottom - z_top) * row as f64 / (h - 1) as f64
        }),
        DepthModel::SmoothRandom {
            z_min,
            z_max,
            grid: [gx, gy],
            inverse_depth_rate: rate,
        } => {
            let mut rng = rng_for(spec.seed, DEPTH_STREAM);
            let mut lattice = || -> Vec<f64> {
                (0..gx * gy).map(|_| StandardNormal.sample(&mut rng)).collect()
            };
            let (a, b) = (lattice(), lattice());
            let (lo, hi) = (1.0 / z_max, 1.0 / z_min);
            let (sx, sy) = ((gx - 1) as f64, (gy - 1) as f64);
            DepthMap::from_fn(w, h, |col, row| {
                let fx = col as f64 / (w - 1) as f64 * sx;
                let fy = row as f64 / (h - 1) as f64 * sy;
                let (ix, iy) = ((fx as usize).min(gx - 2), (fy as usize).min(gy - 2));
                let (tx, ty) = (fx - ix as f64, fy - iy as f64);
                let weights = [
                    (ix, iy, (1.0 - tx) * (1.0 - ty)),
                    (ix + 1, iy, tx * (1.0 - ty)),
                    (ix, iy + 1, (1.0 - tx) * ty),
                    (ix + 1, iy + 1, tx * ty),
                ];
                let norm = weights.iter().map(|w| w.2 * w.2).sum::<f64>().sqrt();
                let field = |l: &[f64]| {
                    weights.iter().map(|&(i, j, w)| w * l[j * gx + i]).sum::<f64>() / norm
                };
                let (x, y) = (field(&a), field(&b));
                let inv = ((x * x + y * y) / (2.0 * rate)).clamp(lo, hi);
                1.0 / inv
            })
        }
    }
}

/// Renders the scene: camera flow everywhere, each object's velocity added on
/// its pixels, then independent Gaussian noise per axis.
pub fn generate(spec: &SceneSpec) -> Result<SceneTruth> {
    spec.validate()?;
    let intr = &spec.intr;
    let depth = depth_map(spec)?;
    let gt_rotational = rotational_flow(intr, spec.motion.rotation, spec.rotation_mode)?;
    let gt_translational = translational_flow(intr, spec.motion.translation, &depth)?;
    let mut gt_flow = gt_rotational.add(&gt_translational, FlowKind::Full)?;
    let mut gt_mask = vec![false; intr.pixel_count()];
    for obj in &spec.objects {
        for (col, row) in obj.pixels() {
            let idx = row * intr.width + col;
            if !gt_mask[idx] {
                let v = gt_flow.get(col, row);
                gt_flow.set(col, row, [v[0] + obj.velocity[0], v[1] + obj.velocity[1]]);
                gt_mask[idx] = true;
            }
        }
    }

    let sigma_px = spec.noise_sigma_pixels();
    let mut noisy = gt_flow.clone().with_kind(FlowKind::Observed);
    if sigma_px > 0.0 {
        let mut rng = rng_for(spec.seed, NOISE_STREAM.wrapping_add(spec.frame));
        let normal = Normal::new(0.0, sigma_px).map_err(|e| Error::domain(e.to_string()))?;
        for p in noisy.data_mut() {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    Ok(SceneTruth {
        gt_flow,
        gt_rotational,
        gt_translational,
        noisy_flow: noisy,
        gt_mask,
        depth,
        motion: spec.motion,
    })
}

/// Bounds for randomized scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub width: usize,
    pub height: usize,
    pub focal_length: f64,
    /// Rotation magnitude is uniform on `[0, max]` about a uniform axis.
    pub max_rotation_deg: f64,
    /// Depth bounds shared by every scene.
    pub z_min: f64,
    pub z_max: f64,
    /// Rate of the exponential inverse-depth distribution.
    pub inverse_depth_rate: f64,
    /// Inverse-depth lattice size `[columns, rows]`.
    pub depth_grid: [usize; 2],
    pub noise_sigma: f64,
    /// Object count is uniform on this inclusive range.
    pub objects: (usize, usize),
    /// Object area as a fraction of the image, uniform on this range.
    pub object_area: (f64, f64),
    /// Object flow after rotation compensation, in multiples of the default
    /// noise sigma, uniform on this range.
    pub object_speed_sigmas: (f64, f64),
    /// Smallest angle between an object pixel's compensated flow and the
    /// background translational direction there.
    pub object_min_offset_deg: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            focal_length: 250.0,
            max_rotation_deg: 1.0,
            z_min: 1.0,
            z_max: 1e4,
            inverse_depth_rate: 6.0,
            depth_grid: [41, 31],
            noise_sigma: 0.0,
            objects: (0, 0),
            object_area: (0.12, 0.30),
            object_speed_sigmas: (10.0, 14.0),
            object_min_offset_deg: 30.0,
        }
    }
}

/// Reference flow-noise sigma used to scale object speeds.
fn reference_sigma_pixels(intr: &CameraIntrinsics) -> f64 {
    crate::likelihood::NoiseModel::for_intrinsics(intr).sigma_pixels()
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Uniform rotation magnitude in `[0, max_deg]` about a uniform axis.
pub fn random_rotation(rng: &mut ChaCha8Rng, max_deg: f64) -> Rotation {
    let mag = rng.random::<f64>() * max_deg.to_radians();
    let axis = random_unit(rng);
    Rotation::new(axis[0] * mag, axis[1] * mag, axis[2] * mag)
}

pub fn random_translation(rng: &mut ChaCha8Rng) -> Translation {
    let v = random_unit(rng);
    Translation {
        u: v[0],
        v: v[1],
        w: v[2],
    }
}

/// Checks an object's compensated flow `v_t + velocity` against the
/// background direction at each of its pixels.
fn object_is_distinct(
    obj: &MovingObject,
    intr: &CameraIntrinsics,
    trans: Translation,
    z: f64,
    min_speed: f64,
    min_offset: f64,
) -> bool {
    let f = intr.focal_length;
    obj.velocity[0].hypot(obj.velocity[1]) >= min_speed
        && obj.pixels().all(|(col, row)| {
            let (x, y) = intr.offset(col, row);
            let d = translational_direction_at(f, x, y, trans);
            let o = [d[0] / z + obj.velocity[0], d[1] / z + obj.velocity[1]];
            let m = o[0].hypot(o[1]);
            let len = d[0].hypot(d[1]);
            if m < min_speed {
                return false;
            }
            if len == 0.0 {
                return true;
            }
            let c = ((o[0] * d[0] + o[1] * d[1]) / (m * len)).clamp(-1.0, 1.0);
            c.acos() >= min_offset
        })
}

/// Mean of `v_t` over an object's pixels for a plate at depth `z`.
fn mean_translational_flow(intr: &CameraIntrinsics, trans: Translation, obj: &MovingObject, z: f64) -> [f64; 2] {
    let n = obj.area() as f64;
    let mut acc = [0.0; 2];
    for (c, r) in obj.pixels() {
        let (x, y) = intr.offset(c, r);
        let d = translational_direction_at(intr.focal_length, x, y, trans);
        acc[0] += d[0] / z / n;
        acc[1] += d[1] / z / n;
    }
    acc
}

/// Places one object whose compensated flow is roughly perpendicular to the
/// mean background direction over it, retrying until every pixel satisfies
/// the speed and offset bounds.
fn place_object(
    rng: &mut ChaCha8Rng,
    intr: &CameraIntrinsics,
    trans: Translation,
    depth: &DepthMap,
    params: &CorpusParams,
) -> Option<MovingObject> {
    let sigma = reference_sigma_pixels(intr);
    let min_speed = params.object_speed_sigmas.0 * sigma;
    let min_offset = params.object_min_offset_deg.to_radians();
    let (w, h) = intr.dims();
    for _ in 0..200 {
        let frac = rng.random_range(params.object_area.0..=params.object_area.1);
        let aspect = rng.random_range(0.75..1.333f64);
        let ow = ((frac * (w * h) as f64 * aspect).sqrt().round() as usize).clamp(1, w);
        let oh = (((frac * (w * h) as f64) / ow as f64).round() as usize).clamp(1, h);
        let col = rng.random_range(0..=w - ow);
        let row = rng.random_range(0..=h - oh);
        let mut obj = MovingObject {
            col,
            row,
            width: ow,
            height: oh,
            velocity: [0.0; 2],
        };
        let z = plate_depth(depth, &obj);
        let mean_vt = mean_translational_flow(intr, trans, &obj, z);
        let base = if mean_vt[0].hypot(mean_vt[1]) > 1e-9 {
            mean_vt[1].atan2(mean_vt[0])
        } else {
            0.0
        };
        let speed = rng.random_range(params.object_speed_sigmas.0..=params.object_speed_sigmas.1) * sigma;
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let angle = base + side * rng.random_range(60f64..=120.0).to_radians();
        let target = [speed * angle.cos(), speed * angle.sin()];
        obj.velocity = [target[0] - mean_vt[0], target[1] - mean_vt[1]];
        if object_is_distinct(&obj, intr, trans, z, min_speed, min_offset) {
            return Some(obj);
        }
    }
    None
}

fn random_spec(rng: &mut ChaCha8Rng, params: &CorpusParams) -> Result<SceneSpec> {
    let intr = CameraIntrinsics::centered(params.focal_length, params.width, params.height)?;
    let rotation = random_rotation(rng, params.max_rotation_deg);
    let translation = random_translation(rng);
    let mut spec = SceneSpec {
        intr,
        motion: CameraMotion::new(rotation, translation)?,
        depth_model: DepthModel::SmoothRandom {
            z_min: params.z_min,
            z_max: params.z_max,
            grid: params.depth_grid,
            inverse_depth_rate: params.inverse_depth_rate,
        },
        objects: Vec::new(),
        noise_sigma: params.noise_sigma,
        // 63 bits, so seeds fit the signed integers of TOML scene files.
        seed: rng.random::<u64>() >> 1,
        frame: 0,
        rotation_mode: RotationMode::Approx,
    };
    let count = rng.random_range(params.objects.0..=params.objects.1);
    if count > 0 {
        let depth = background_depth(&spec)?;
        for _ in 0..count {
            if let Some(obj) = place_object(rng, &spec.intr, translation, &depth, params) {
                spec.objects.push(obj);
            }
        }
    }
    Ok(spec)
}

/// `n` reproducible random scene specs.
pub fn corpus(n: usize, params: &CorpusParams, seed: u64) -> Result<Vec<SceneSpec>> {
    if n == 0 {
        return Err(Error::EmptyInput("corpus size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(n);
    while specs.len() < n {
        let spec = random_spec(&mut rng, params)?;
        // Scenes that asked for objects but could not place them all are redrawn.
        if spec.objects.len() >= params.objects.0 {
            specs.push(spec);
        }
    }
    Ok(specs)
}

/// A sequence of frames with fixed camera motion and depth in which each
/// object is carried by its own flow. Object rectangles move by the rounded
/// mean flow over their pixels; an object whose flow would take it out of the
/// image has its compensated flow reversed in that frame, so the first frame
/// may differ from `first` in object velocities.
pub fn sequence(first: &SceneSpec, frames: usize) -> Result<Vec<SceneSpec>> {
    first.validate()?;
    if frames == 0 {
        return Err(Error::EmptyInput("sequence length"));
    }
    let intr = &first.intr;
    let background = background_depth(first)?;
    let rot = rotational_flow(intr, first.motion.rotation, first.rotation_mode)?;
    let mean_vt = |obj: &MovingObject| {
        mean_translational_flow(intr, first.motion.translation, obj, plate_depth(&background, obj))
    };
    let mean_flow = |obj: &MovingObject, velocity: [f64; 2]| {
        let n = obj.area() as f64;
        let vt = mean_vt(obj);
        let mut acc = [vt[0] + velocity[0], vt[1] + velocity[1]];
        for (c, r) in obj.pixels() {
            let a = rot.get(c, r);
            acc[0] += a[0] / n;
            acc[1] += a[1] / n;
        }
        acc
    };
    let fits = |obj: &MovingObject, shift: [f64; 2]| {
        let c = obj.col as f64 + shift[0].round();
        let r = obj.row as f64 + shift[1].round();
        c >= 0.0
            && r >= 0.0
            && c as usize + obj.width <= intr.width
            && r as usize + obj.height <= intr.height
    };

    // Reverses an object's compensated flow (background translation plus
    // velocity) if its own flow would carry it out of the image.
    let keep_inside = |obj: &mut MovingObject| {
        if !fits(obj, mean_flow(obj, obj.velocity)) {
            let vt = mean_vt(obj);
            obj.velocity = [-2.0 * vt[0] - obj.velocity[0], -2.0 * vt[1] - obj.velocity[1]];
        }
    };

    let mut specs: Vec<SceneSpec> = Vec::with_capacity(frames);
    let mut current = first.clone();
    for k in 0..frames {
        current.frame = first.frame + k as u64;
        current.objects.iter_mut().for_each(keep_inside);
        let mut next = current.clone();
        for (moved, obj) in next.objects.iter_mut().zip(&current.objects) {
            let shift = mean_flow(obj, obj.velocity);
            let c = (obj.col as f64 + shift[0].round()).clamp(0.0, (intr.width - obj.width) as f64);
            let r = (obj.row as f64 + shift[1].round()).clamp(0.0, (intr.height - obj.height) as f64);
            moved.col = c as usize;
            moved.row = r as usize;
            // Same compensated flow at the new position.
            let (vt_old, vt_new) = (mean_vt(obj), mean_vt(moved));
            moved.velocity = [
                obj.velocity[0] + vt_old[0] - vt_new[0],
                obj.velocity[1] + vt_old[1] - vt_new[1],
            ];
        }
        specs.push(std::mem::replace(&mut current, next));
    }
    Ok(specs)
}
