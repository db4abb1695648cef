//! Pinhole intrinsics and the 5-DoF camera motion being estimated.
//!
//! Image coordinates put x to the right and y downward. Motion-field
//! formulas are evaluated at offsets from the principal point.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub focal_length: f64,
    /// Principal point `(cx, cy)` in pixels.
    pub principal_point: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        focal_length: f64,
        principal_point: (f64, f64),
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let intr = Self {
            focal_length,
            principal_point,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Intrinsics with the principal point at the geometric image center.
    pub fn centered(focal_length: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            focal_length,
            ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(Error::domain(format!(
                "focal length must be positive, got {}",
                self.focal_length
            )));
        }
        if self.width < 2 || self.height < 2 {
            return Err(Error::domain(format!(
                "image must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        let (cx, cy) = self.principal_point;
        if !(cx >= 0.0 && cx < self.width as f64 && cy >= 0.0 && cy < self.height as f64) {
            return Err(Error::domain(format!(
                "principal point ({cx}, {cy}) outside the image"
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Offset of pixel `(col, row)` from the principal point.
    #[inline]
    pub fn offset(&self, col: usize, row: usize) -> (f64, f64) {
        (
            col as f64 - self.principal_point.0,
            row as f64 - self.principal_point.1,
        )
    }

    /// Length of the image diagonal in pixels, the default flow normalizer.
    pub fn diagonal(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }
}

/// Rotation rates `(A, B, C)` in radians per frame about the x, y and z axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rotation {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Rotation {
    pub const ZERO: Rotation = Rotation {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn from_degrees(a: f64, b: f64, c: f64) -> Self {
        Self::new(a.to_radians(), b.to_radians(), c.to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [self.a.to_degrees(), self.b.to_degrees(), self.c.to_degrees()]
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("A", self.a), ("B", self.b), ("C", self.c)] {
            if !v.is_finite() || v.abs() >= FRAC_PI_2 {
                return Err(Error::domain(format!(
                    "rotation {name}={v} outside (-pi/2, pi/2)"
                )));
            }
        }
        Ok(())
    }
}

/// Unit translation direction `(U, V, W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

pub(crate) const UNIT_NORM_TOL: f64 = 1e-9;

impl Translation {
    pub const FORWARD: Translation = Translation {
        u: 0.0,
        v: 0.0,
        w: 1.0,
    };

    /// Builds a translation, rejecting vectors that are not unit length.
    pub fn new(u: f64, v: f64, w: f64) -> Result<Self> {
        let t = Self { u, v, w };
        t.validate()?;
        Ok(t)
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_vector(u: f64, v: f64, w: f64) -> Result<Self> {
        let n = (u * u + v * v + w * w).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::domain("translation vector must be nonzero and finite"));
        }
        Ok(Self {
            u: u / n,
            v: v / n,
            w: w / n,
        })
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::domain(format!("translation must be unit-norm, |t|={n}")));
        }
        Ok(())
    }

    pub fn negated(self) -> Self {
        Self {
            u: -self.u,
            v: -self.v,
            w: -self.w,
        }
    }

    pub fn dot(&self, other: &Translation) -> f64 {
        self.u * other.u + self.v * other.v + self.w * other.w
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }

    /// Angle to another direction in radians.
    pub fn angle_to(&self, other: &Translation) -> f64 {
        // atan2 keeps full precision near 0 and π, where acos does not.
        let [a, b] = [self.as_array(), other.as_array()];
        let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        (cross[0].hypot(cross[1]).hypot(cross[2])).atan2(self.dot(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMotion {
    pub rotation: Rotation,
    pub translation: Translation,
}

impl CameraMotion {
    pub fn new(rotation: Rotation, translation: Translation) -> Result<Self> {
        rotation.validate()?;
        translation.validate()?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.rotation.validate()?;
        self.translation.validate()
    }
}

impl Default for CameraMotion {
    fn default() -> Self {
        Self {
            rotation: Rotation::ZERO,
            translation: Translation::FORWARD,
        }
    }
}
