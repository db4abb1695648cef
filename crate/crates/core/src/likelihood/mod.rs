//! Likelihood of an observed translational flow vector given the camera's
//! translation direction.
//!
//! The unknown motion-field magnitude `r` is integrated out:
//!
//! ```text
//! p(o_t | U,V,W,x,y) = ∫₀^∞ N(o_t - r·d; 0, σ²I) · p_{1/Z}(r / g) / g  dr
//! ```
//!
//! where `d` is the unit translational direction at the pixel, `g` is the
//! depth-independent part of the translational magnitude (`r = g / Z`) and
//! `p_{1/Z}` is an exponential prior over inverse depth. Everything is
//! expressed in normalized flow units (pixels divided by
//! [`NoiseModel::flow_normalizer`]).
//!
//! The integral is evaluated as a composite-Simpson discrete sum in log
//! space. Because the log-integrand is a concave quadratic in `r`, the sum is
//! restricted to the window holding all but `1 - r_max_quantile` of the
//! integrand's mass, so that the step resolves the integrand whether it is
//! dominated by the noise term or by the prior.

mod calibrate;
mod table;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate_depth_prior, calibrate_noise, measure_noise_variance};
pub use table::{build_table, build_table_with_axes, LikelihoodTable, TableAxes, TableResolution};

use crate::camera::{CameraIntrinsics, Translation};
use crate::error::{Error, Result};
use crate::motion_field::translational_direction_at;

/// Spherical flow-noise model `Σ = σ² I` in normalized flow units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// `σ²` per axis.
    pub covariance_scale: f64,
    /// Pixels per normalized flow unit.
    pub flow_normalizer: f64,
}

impl NoiseModel {
    /// Reference noise variance measured on ground-truth vs estimated flow.
    pub const DEFAULT_COVARIANCE_SCALE: f64 = 16.5e-5;

    pub fn new(covariance_scale: f64, flow_normalizer: f64) -> Result<Self> {
        let n = Self {
            covariance_scale,
            flow_normalizer,
        };
        n.validate()?;
        Ok(n)
    }

    /// Default variance with the image diagonal as normalizer.
    pub fn for_intrinsics(intr: &CameraIntrinsics) -> Self {
        Self {
            covariance_scale: Self::DEFAULT_COVARIANCE_SCALE,
            flow_normalizer: intr.diagonal(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.covariance_scale.is_finite() && self.covariance_scale > 0.0) {
            return Err(Error::domain(format!(
                "noise covariance must be positive, got {}",
                self.covariance_scale
            )));
        }
        if !(self.flow_normalizer.is_finite() && self.flow_normalizer > 0.0) {
            return Err(Error::domain(format!(
                "flow normalizer must be positive, got {}",
                self.flow_normalizer
            )));
        }
        Ok(())
    }

    /// Standard deviation per axis, normalized units.
    pub fn sigma(&self) -> f64 {
        self.covariance_scale.sqrt()
    }

    /// Standard deviation per axis in pixels.
    pub fn sigma_pixels(&self) -> f64 {
        self.sigma() * self.flow_normalizer
    }
}

/// Exponential prior over inverse depth, `p(1/Z) = λ exp(-λ / Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseDepthPrior {
    pub rate: f64,
}

impl InverseDepthPrior {
    pub const DEFAULT_RATE: f64 = 0.64;

    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::domain(format!("prior rate must be positive, got {rate}")));
        }
        Ok(Self { rate })
    }

    pub fn density(&self, inv_depth: f64) -> f64 {
        if inv_depth < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * inv_depth).exp()
        }
    }

    /// Inverse-depth value below which the prior holds mass `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        -(-q).ln_1p() / self.rate
    }
}

impl Default for InverseDepthPrior {
    fn default() -> Self {
        Self {
            rate: Self::DEFAULT_RATE,
        }
    }
}

/// Discretization of the magnitude integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationScheme {
    /// Number of Simpson intervals (rounded up to even).
    pub num_steps: usize,
    /// Fraction of the integrand's mass the summation window must retain.
    pub r_max_quantile: f64,
}

impl IntegrationScheme {
    pub fn new(num_steps: usize, r_max_quantile: f64) -> Result<Self> {
        let s = Self {
            num_steps,
            r_max_quantile,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_steps < 16 {
            return Err(Error::domain(format!(
                "integration needs at least 16 steps, got {}",
                self.num_steps
            )));
        }
        if !(self.r_max_quantile > 0.9 && self.r_max_quantile < 1.0) {
            return Err(Error::domain(format!(
                "r_max_quantile must lie in (0.9, 1), got {}",
                self.r_max_quantile
            )));
        }
        Ok(())
    }

    fn even_steps(&self) -> usize {
        self.num_steps + (self.num_steps & 1)
    }

    /// Log-density drop at the window edges relative to the mode.
    fn window_drop(&self) -> f64 {
        -(-self.r_max_quantile).ln_1p() + 2.0
    }
}

impl Default for IntegrationScheme {
    fn default() -> Self {
        Self {
            num_steps: 256,
            r_max_quantile: 1.0 - 1e-12,
        }
    }
}

/// Everything the per-pixel likelihood depends on besides the flow itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    pub noise: NoiseModel,
    pub prior: InverseDepthPrior,
    pub scheme: IntegrationScheme,
}

impl LikelihoodModel {
    pub fn for_intrinsics(intr: &CameraIntrinsics) -> Self {
        Self {
            noise: NoiseModel::for_intrinsics(intr),
            prior: InverseDepthPrior::default(),
            scheme: IntegrationScheme::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.scheme.validate()
    }

    /// Log-likelihood in terms of magnitude, angle cosine and geometry factor.
    pub fn log_likelihood(&self, m: f64, cos_dtheta: f64, g: f64) -> f64 {
        log_likelihood(
            m,
            cos_dtheta,
            g,
            self.noise.covariance_scale,
            self.prior.rate,
            &self.scheme,
        )
    }
}

/// Depth-independent part of the translational magnitude at offset `(x, y)`,
/// in normalized units: `|(-fU + xW, -fV + yW)| / normalizer`.
pub fn g_factor(
    intr: &CameraIntrinsics,
    x: f64,
    y: f64,
    trans: Translation,
    flow_normalizer: f64,
) -> f64 {
    let d = translational_direction_at(intr.focal_length, x, y, trans);
    d[0].hypot(d[1]) / flow_normalizer
}

/// Below this geometry factor the prior is treated as a point mass at zero.
const G_FOE: f64 = 1e-200;

/// Log of the bivariate isotropic normal density at distance² `d2`.
#[inline]
fn log_noise_density(d2: f64, var: f64) -> f64 {
    -d2 / (2.0 * var) - (2.0 * PI * var).ln()
}

/// Log-likelihood of a translational flow vector with magnitude `m` at angle
/// `acos(cos_dtheta)` from the predicted direction, at geometry factor `g`.
///
/// `noise_var` is `σ²`, `rate` the inverse-depth prior rate. At `g = 0` (the
/// focus of expansion) all prior mass sits at `r = 0` and the result is the
/// noise density of `o_t` itself.
pub fn log_likelihood(
    m: f64,
    cos_dtheta: f64,
    g: f64,
    noise_var: f64,
    rate: f64,
    scheme: &IntegrationScheme,
) -> f64 {
    let c = cos_dtheta.clamp(-1.0, 1.0);
    if g <= G_FOE {
        return log_noise_density(m * m, noise_var);
    }
    let slope = rate / g;

    // log integrand: -|o - r d|²/(2σ²) - ln(2πσ²) + ln(λ/g) - λ r/g, which is
    // -(r - mu)²/(2σ²) + const with mu = m c - σ² λ / g.
    let log_integrand = |r: f64| {
        let d2 = (m - r) * (m - r) + 2.0 * m * r * (1.0 - c);
        log_noise_density(d2, noise_var) + slope.ln() - slope * r
    };

    let sigma = noise_var.sqrt();
    let mu = m * c - noise_var * slope;
    let drop = scheme.window_drop();
    let reach2 = 2.0 * drop * noise_var;
    let (lo, hi) = if mu >= 0.0 {
        let half = reach2.sqrt();
        ((mu - half).max(0.0), mu + half)
    } else {
        // Decay from the boundary mode at r = 0: solve r² + 2|mu| r = 2·drop·σ².
        (0.0, reach2 / ((mu * mu + reach2).sqrt() - mu))
    };
    debug_assert!(hi > lo && sigma > 0.0);

    let n = scheme.even_steps();
    let h = (hi - lo) / n as f64;
    let mode = mu.max(lo);
    let peak = log_integrand(mode);

    let mut acc = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (log_integrand(lo + h * i as f64) - peak).exp();
    }
    peak + (acc * h / 3.0).ln()
}

/// Total mass of the induced magnitude prior `p_{1/Z}(r/g)/g` as integrated
/// by `scheme`; equals 1 up to discretization and truncation error.
pub fn magnitude_prior_mass(g: f64, prior: &InverseDepthPrior, scheme: &IntegrationScheme) -> f64 {
    if g <= G_FOE {
        return 1.0;
    }
    let slope = prior.rate / g;
    let hi = scheme.window_drop() / slope;
    let n = scheme.even_steps();
    let h = hi / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * slope * (-slope * h * i as f64).exp();
    }
    acc * h / 3.0
}

/// Log-likelihood of a rotation-compensated flow vector `o_t` (normalized
/// units) observed at offset `(x, y)` given the translation direction.
pub fn flow_vector_likelihood(
    o_t: [f64; 2],
    intr: &CameraIntrinsics,
    x: f64,
    y: f64,
    trans: Translation,
    noise: &NoiseModel,
    prior: &InverseDepthPrior,
    scheme: &IntegrationScheme,
) -> Result<f64> {
    if !(o_t[0].is_finite() && o_t[1].is_finite()) {
        return Err(Error::NonFinite("translational flow vector"));
    }
    let (m, c, g) = likelihood_coordinates(o_t, intr.focal_length, x, y, trans, noise.flow_normalizer);
    Ok(log_likelihood(
        m,
        c,
        g,
        noise.covariance_scale,
        prior.rate,
        scheme,
    ))
}

/// `(|o_t|, cos Δθ, g)` for a normalized flow vector at offset `(x, y)`.
#[inline]
pub fn likelihood_coordinates(
    o_t: [f64; 2],
    focal_length: f64,
    x: f64,
    y: f64,
    trans: Translation,
    flow_normalizer: f64,
) -> (f64, f64, f64) {
    let d = translational_direction_at(focal_length, x, y, trans);
    let len = d[0].hypot(d[1]);
    let m = o_t[0].hypot(o_t[1]);
    let c = if m > 0.0 && len > 0.0 {
        ((o_t[0] * d[0] + o_t[1] * d[1]) / (m * len)).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    (m, c, len / flow_normalizer)
}
