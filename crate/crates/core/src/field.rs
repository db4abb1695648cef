//! Dense per-pixel containers: flow fields, depth maps and angle/magnitude
//! decompositions. Storage is row-major with `index = row * width + col`.

use crate::error::{Error, Result};

/// Which component of the motion field a [`FlowField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// Synthesized rotation + translation.
    Full,
    Rotational,
    Translational,
    /// Measured flow, possibly noisy, possibly rotation-compensated.
    Observed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f64; 2]>,
    kind: FlowKind,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize, kind: FlowKind) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
            kind,
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        data: Vec<[f64; 2]>,
        kind: FlowKind,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        if data.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::NonFinite("flow field"));
        }
        Ok(Self {
            width,
            height,
            data,
            kind,
        })
    }

    /// Builds a field by evaluating `f(col, row)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        kind: FlowKind,
        mut f: impl FnMut(usize, usize) -> [f64; 2],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            data,
            kind,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: FlowKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<[f64; 2]> {
        self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> [f64; 2] {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: [f64; 2]) {
        self.data[row * self.width + col] = v;
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|p| p[0].is_finite() && p[1].is_finite())
    }

    /// Pixel-wise sum; the result takes `kind`.
    pub fn add(&self, other: &FlowField, kind: FlowKind) -> Result<FlowField> {
        other.ensure_dims(self.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        Ok(FlowField {
            width: self.width,
            height: self.height,
            data,
            kind,
        })
    }

    pub fn sub(&self, other: &FlowField, kind: FlowKind) -> Result<FlowField> {
        other.ensure_dims(self.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
            .collect();
        Ok(FlowField {
            width: self.width,
            height: self.height,
            data,
            kind,
        })
    }

    pub fn scaled(&self, s: f64) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
            kind: self.kind,
        }
    }

    /// Largest per-pixel Euclidean difference to `other`.
    pub fn max_abs_diff(&self, other: &FlowField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|p| p[0].hypot(p[1])).collect()
    }
}

/// A generic scalar image, used for depth maps, masks and per-pixel scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Relative scene depth; every entry is positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(ScalarMap);

impl DepthMap {
    pub fn new(map: ScalarMap) -> Result<Self> {
        if map.data.iter().any(|&z| !(z.is_finite() && z > 0.0)) {
            return Err(Error::domain("depth must be positive and finite everywhere"));
        }
        Ok(Self(map))
    }

    pub fn constant(width: usize, height: usize, z: f64) -> Result<Self> {
        Self::new(ScalarMap::filled(width, height, z))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(ScalarMap::from_fn(width, height, f))
    }

    pub fn map(&self) -> &ScalarMap {
        &self.0
    }

    pub fn into_map(self) -> ScalarMap {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.0.get(col, row)
    }

    pub fn scaled(&self, s: f64) -> Result<DepthMap> {
        DepthMap::new(self.0.map(|z| z * s))
    }
}

/// Flow decomposed into a per-pixel unit direction and a magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMagnitude {
    pub width: usize,
    pub height: usize,
    /// `(cos θ, sin θ)`; `(0, 0)` where `valid` is false.
    pub unit_dir: Vec<[f64; 2]>,
    pub magnitude: Vec<f64>,
    pub valid: Vec<bool>,
}

impl AngleMagnitude {
    /// Angle in `(-π, π]` at a valid pixel.
    pub fn angle(&self, idx: usize) -> Option<f64> {
        self.valid[idx].then(|| self.unit_dir[idx][1].atan2(self.unit_dir[idx][0]))
    }
}
