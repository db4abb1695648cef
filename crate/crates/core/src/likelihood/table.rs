//! Precomputed log-likelihood over `(m, Δθ, g)`.
//!
//! The likelihood depends on the translational flow vector only through its
//! magnitude `m` and its angle `Δθ` to the predicted direction, so a 3D table
//! covers every pixel and every candidate motion.
//!
//! Queries interpolate trilinearly between the eight surrounding nodes and
//! clamp out-of-range inputs to the boundary. Within a cell the fractional
//! position is measured in `m²`, `cos Δθ` and `ln g`. Away from the prior's
//! influence the log-likelihood is dominated by `-m²/(2σ²)`, which `m²`
//! interpolates exactly; in `ln m` the same term costs tens of nats at
//! large magnitudes.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IntegrationScheme, InverseDepthPrior, NoiseModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableResolution {
    pub n_m: usize,
    pub n_dtheta: usize,
    pub n_g: usize,
}

impl Default for TableResolution {
    fn default() -> Self {
        Self {
            n_m: 64,
            n_dtheta: 64,
            n_g: 64,
        }
    }
}

/// Axis node positions of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableAxes {
    pub m: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub g: Vec<f64>,
}

impl TableAxes {
    pub const DEFAULT_MIN: f64 = 1e-5;
    pub const DEFAULT_MAX: f64 = 1.0;

    /// `m` = 0 followed by log-spaced nodes over `[1e-5, 1]`, log-spaced `g`
    /// over the same range, uniform `Δθ` over `[0, π]`.
    pub fn standard(res: TableResolution) -> Result<Self> {
        Self::log_spaced(res, Self::DEFAULT_MIN, Self::DEFAULT_MAX)
    }

    pub fn log_spaced(res: TableResolution, lo: f64, hi: f64) -> Result<Self> {
        if res.n_m < 8 || res.n_dtheta < 8 || res.n_g < 8 {
            return Err(Error::domain(format!(
                "table resolution must be at least 8 per axis, got {res:?}"
            )));
        }
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::domain(format!("bad log-axis range [{lo}, {hi}]")));
        }
        Ok(Self {
            // The exact m = 0 node keeps zero-flow lookups free of any
            // dependence on Δθ.
            m: std::iter::once(0.0).chain(log_space(lo, hi, res.n_m - 1)).collect(),
            dtheta: (0..res.n_dtheta)
                .map(|i| PI * i as f64 / (res.n_dtheta - 1) as f64)
                .collect(),
            g: log_space(lo, hi, res.n_g),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("m", &self.m), ("dtheta", &self.dtheta), ("g", &self.g)] {
            if axis.len() < 2 {
                return Err(Error::domain(format!("axis {name} needs at least 2 nodes")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::domain(format!("axis {name} must be strictly increasing")));
            }
        }
        if self.m[0] < 0.0 || self.g[0] <= 0.0 {
            return Err(Error::domain("m axis must be non-negative and g axis positive"));
        }
        if self.dtheta[0] < 0.0 || *self.dtheta.last().unwrap() > PI {
            return Err(Error::domain("dtheta axis must lie within [0, pi]"));
        }
        Ok(())
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// An immutable grid of log-likelihood values.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTable {
    axes: TableAxes,
    /// Row-major `(m, Δθ, g)`.
    values: Vec<f64>,
    // Interpolation coordinates of the nodes.
    m_sq: Vec<f64>,
    cos_dtheta: Vec<f64>,
    ln_g: Vec<f64>,
    /// Node spacing in `ln g` when the g axis is log-uniform, which lets a
    /// query index it directly instead of searching.
    ln_g_step: Option<f64>,
}

impl LikelihoodTable {
    /// Wraps precomputed values, checking shapes and invariants.
    pub fn from_parts(axes: TableAxes, values: Vec<f64>) -> Result<Self> {
        axes.validate()?;
        let n = axes.m.len() * axes.dtheta.len() * axes.g.len();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: (n, 1),
                actual: (values.len(), 1),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("likelihood table"));
        }
        let ln_g: Vec<f64> = axes.g.iter().map(|v| v.ln()).collect();
        let step = (ln_g[ln_g.len() - 1] - ln_g[0]) / (ln_g.len() - 1) as f64;
        let uniform = ln_g
            .iter()
            .enumerate()
            .all(|(i, v)| (v - (ln_g[0] + step * i as f64)).abs() <= 1e-9 * step);
        Ok(Self {
            m_sq: axes.m.iter().map(|v| v * v).collect(),
            cos_dtheta: axes.dtheta.iter().map(|v| v.cos()).collect(),
            ln_g,
            ln_g_step: uniform.then_some(step),
            axes,
            values,
        })
    }

    pub fn axes(&self) -> &TableAxes {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.axes.m.len(), self.axes.dtheta.len(), self.axes.g.len())
    }

    #[inline]
    fn index(&self, im: usize, id: usize, ig: usize) -> usize {
        let (_, nd, ng) = self.shape();
        (im * nd + id) * ng + ig
    }

    /// Stored value at a node.
    pub fn node(&self, im: usize, id: usize, ig: usize) -> f64 {
        self.values[self.index(im, id, ig)]
    }

    /// Interpolated log-likelihood at `(m, Δθ, g)`.
    pub fn query(&self, m: f64, dtheta: f64, g: f64) -> f64 {
        self.query_cos(m, dtheta.cos(), g)
    }

    /// Same as [`query`](Self::query) with the angle given by its cosine.
    #[inline]
    pub fn query_cos(&self, m: f64, cos_dtheta: f64, g: f64) -> f64 {
        let (im, tm) = bracket(&self.axes.m, &self.m_sq, m, |v| v * v);
        let (id, td) = bracket_cos(&self.cos_dtheta, cos_dtheta);
        let (ig, tg) = match self.ln_g_step {
            Some(step) => bracket_uniform(&self.ln_g, step, g.ln()),
            None => bracket(&self.axes.g, &self.ln_g, g, f64::ln),
        };

        let (_, nd, ng) = self.shape();
        let base = (im * nd + id) * ng + ig;
        let v = &self.values;
        // Exact at both ends, so node queries return stored values.
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(v[base], v[base + 1], tg);
        let c01 = lerp(v[base + ng], v[base + ng + 1], tg);
        let c10 = lerp(v[base + nd * ng], v[base + nd * ng + 1], tg);
        let c11 = lerp(v[base + nd * ng + ng], v[base + nd * ng + ng + 1], tg);
        lerp(lerp(c00, c01, td), lerp(c10, c11, td), tm)
    }
}

/// Lower node index and fraction along an increasing axis, measured in the
/// coordinate `warp` (with `warped[i] == warp(axis[i])`), clamped to range.
#[inline]
fn bracket(axis: &[f64], warped: &[f64], v: f64, warp: impl Fn(f64) -> f64) -> (usize, f64) {
    let n = axis.len();
    if !(v > axis[0]) {
        return (0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= v) - 1;
    let t = (warp(v) - warped[i]) / (warped[i + 1] - warped[i]);
    (i, t.clamp(0.0, 1.0))
}

/// [`bracket`] for an axis whose nodes are evenly spaced in the queried
/// coordinate.
#[inline]
fn bracket_uniform(nodes: &[f64], step: f64, v: f64) -> (usize, f64) {
    let n = nodes.len();
    let pos = (v - nodes[0]) / step;
    if !(pos > 0.0) {
        return (0, 0.0);
    }
    if pos >= (n - 1) as f64 {
        return (n - 2, 1.0);
    }
    let i = (pos as usize).min(n - 2);
    (i, (pos - i as f64).clamp(0.0, 1.0))
}

/// Lower node index and fraction for an angle given by its cosine; node
/// cosines decrease along the axis.
#[inline]
fn bracket_cos(cos_axis: &[f64], c: f64) -> (usize, f64) {
    let n = cos_axis.len();
    if c >= cos_axis[0] {
        return (0, 0.0);
    }
    if !(c > cos_axis[n - 1]) {
        return (n - 2, 1.0);
    }
    let i = cos_axis.partition_point(|&a| a >= c) - 1;
    let t = (cos_axis[i] - c) / (cos_axis[i] - cos_axis[i + 1]);
    (i, t.clamp(0.0, 1.0))
}

/// Tabulates the log-likelihood on the standard axes.
pub fn build_table(
    noise: &NoiseModel,
    prior: &InverseDepthPrior,
    scheme: &IntegrationScheme,
    resolution: TableResolution,
) -> Result<LikelihoodTable> {
    build_table_with_axes(noise, prior, scheme, TableAxes::standard(resolution)?)
}

pub fn build_table_with_axes(
    noise: &NoiseModel,
    prior: &InverseDepthPrior,
    scheme: &IntegrationScheme,
    axes: TableAxes,
) -> Result<LikelihoodTable> {
    noise.validate()?;
    scheme.validate()?;
    axes.validate()?;
    let var = noise.covariance_scale;
    let rate = prior.rate;
    let cosines: Vec<f64> = axes.dtheta.iter().map(|t| t.cos()).collect();
    let values: Vec<f64> = axes
        .m
        .par_iter()
        .flat_map_iter(|&m| {
            let mut slab = Vec::with_capacity(cosines.len() * axes.g.len());
            for &c in &cosines {
                for &g in &axes.g {
                    slab.push(super::log_likelihood(m, c, g, var, rate, scheme));
                }
            }
            slab
        })
        .collect();
    LikelihoodTable::from_parts(axes, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_table() -> LikelihoodTable {
        let intr = crate::camera::CameraIntrinsics::centered(200.0, 320, 240).unwrap();
        build_table(
            &NoiseModel::for_intrinsics(&intr),
            &InverseDepthPrior::default(),
            &IntegrationScheme::default(),
            TableResolution {
                n_m: 12,
                n_dtheta: 10,
                n_g: 9,
            },
        )
        .unwrap()
    }

    #[test]
    fn rejects_low_resolution() {
        let r = TableResolution {
            n_m: 7,
            n_dtheta: 64,
            n_g: 64,
        };
        assert!(TableAxes::standard(r).is_err());
    }

    #[test]
    fn axes_are_strictly_increasing() {
        let axes = TableAxes::standard(TableResolution::default()).unwrap();
        axes.validate().unwrap();
        assert_eq!(axes.m[0], 0.0);
        assert_eq!(axes.m[1], 1e-5);
        assert_eq!(*axes.g.last().unwrap(), 1.0);
        assert_eq!(*axes.dtheta.last().unwrap(), PI);
    }

    #[test]
    fn node_queries_return_stored_values() {
        let t = small_table();
        let (nm, nd, ng) = t.shape();
        for im in 0..nm {
            for id in 0..nd {
                for ig in 0..ng {
                    let q = t.query(t.axes.m[im], t.axes.dtheta[id], t.axes.g[ig]);
                    let s = t.node(im, id, ig);
                    assert!((q - s).abs() <= 1e-12 * s.abs().max(1.0), "{q} vs {s}");
                }
            }
        }
    }

    #[test]
    fn clamps_outside_range() {
        let t = small_table();
        let (nm, nd, ng) = t.shape();
        assert_eq!(t.query(0.0, 0.0, 0.0), t.node(0, 0, 0));
        assert_eq!(t.query(5.0, PI, 7.0), t.node(nm - 1, nd - 1, ng - 1));
        // Clamping only the out-of-range coordinate matches the boundary slice.
        let g_mid = t.axes.g[3];
        // ln g of an interior node sits within an ulp of the uniform grid.
        let (q, n) = (t.query(10.0, 0.0, g_mid), t.node(nm - 1, 0, 3));
        assert!((q - n).abs() <= 1e-12 * n.abs());
        assert_eq!(t.query(t.axes.m[2], 0.0, 1e-9), t.node(2, 0, 0));
    }

    #[test]
    fn monotone_in_angle_on_every_slice() {
        let t = small_table();
        let (nm, nd, ng) = t.shape();
        for im in 0..nm {
            for ig in 0..ng {
                for id in 1..nd {
                    assert!(t.node(im, id, ig) <= t.node(im, id - 1, ig));
                }
            }
        }
    }

    #[test]
    fn from_parts_rejects_bad_input() {
        let t = small_table();
        let mut vals = t.values().to_vec();
        vals.pop();
        assert!(LikelihoodTable::from_parts(t.axes().clone(), vals).is_err());
        let mut vals = t.values().to_vec();
        vals[3] = f64::NAN;
        assert!(LikelihoodTable::from_parts(t.axes().clone(), vals).is_err());
        let mut axes = t.axes().clone();
        axes.m.swap(0, 1);
        assert!(LikelihoodTable::from_parts(axes, t.values().to_vec()).is_err());
    }
}
