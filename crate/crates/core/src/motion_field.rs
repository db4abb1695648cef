//! Perspective motion-field synthesis and decomposition.
//!
//! The flow due to camera motion splits into a rotational part, which
//! depends only on the rotation rates and the focal length, and a
//! translational part, whose direction depends only on the translation
//! direction and whose magnitude scales with inverse depth.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, Rotation, Translation};
use crate::error::{Error, Result};
use crate::field::{AngleMagnitude, DepthMap, FlowField, FlowKind};

/// How rotational flow is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationMode {
    /// First-order (small-angle) polynomial in the pixel offset.
    #[default]
    Approx,
    /// Lift to a ray, rotate, reproject.
    Exact,
}

impl std::str::FromStr for RotationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx" => Ok(RotationMode::Approx),
            "exact" => Ok(RotationMode::Exact),
            other => Err(Error::domain(format!("unknown rotation mode {other:?}"))),
        }
    }
}

/// Small-angle rotational flow at offset `(x, y)` from the principal point.
#[inline]
pub fn rotational_flow_approx_at(f: f64, x: f64, y: f64, rot: Rotation) -> [f64; 2] {
    let Rotation { a, b, c } = rot;
    let xy = x * y;
    [
        a / f * xy - b * f - b / f * x * x + c * y,
        a * f + a / f * y * y - b / f * xy - c * x,
    ]
}

/// Rotation that scene points undergo in the camera frame when the camera
/// turns by `rot`. Its first-order expansion is `p ↦ p - ω × p`.
fn point_rotation(rot: Rotation) -> Rotation3<f64> {
    let camera = Rotation3::from_axis_angle(&Vector3::z_axis(), rot.c)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), rot.b)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), rot.a);
    camera.inverse()
}

#[inline]
fn reproject(f: f64, x: f64, y: f64, r: &Rotation3<f64>) -> Option<[f64; 2]> {
    let p = r * Vector3::new(x, y, f);
    if p.z <= f64::EPSILON * f {
        return None;
    }
    Some([f * p.x / p.z - x, f * p.y / p.z - y])
}

/// Rotational flow evaluator with the rotation matrix computed once, for
/// inner loops that visit many pixels under the same rotation.
#[derive(Debug, Clone)]
pub(crate) enum RotationalFlow {
    Approx(Rotation),
    Exact(Rotation3<f64>),
}

impl RotationalFlow {
    pub(crate) fn new(rot: Rotation, mode: RotationMode) -> Self {
        match mode {
            RotationMode::Approx => Self::Approx(rot),
            RotationMode::Exact => Self::Exact(point_rotation(rot)),
        }
    }

    /// `None` when the rotated ray leaves the front half-space.
    #[inline]
    pub(crate) fn at(&self, f: f64, x: f64, y: f64) -> Option<[f64; 2]> {
        match self {
            Self::Approx(rot) => Some(rotational_flow_approx_at(f, x, y, *rot)),
            Self::Exact(r) => reproject(f, x, y, r),
        }
    }
}

/// Rotational flow at a single offset.
pub fn rotational_flow_at(
    f: f64,
    x: f64,
    y: f64,
    rot: Rotation,
    mode: RotationMode,
) -> Result<[f64; 2]> {
    rot.validate()?;
    match mode {
        RotationMode::Approx => Ok(rotational_flow_approx_at(f, x, y, rot)),
        RotationMode::Exact => reproject(f, x, y, &point_rotation(rot))
            .ok_or_else(|| Error::domain("rotation moves the pixel ray behind the camera")),
    }
}

/// Depth-independent flow field induced by camera rotation.
pub fn rotational_flow(
    intr: &CameraIntrinsics,
    rot: Rotation,
    mode: RotationMode,
) -> Result<FlowField> {
    intr.validate()?;
    rot.validate()?;
    let f = intr.focal_length;
    let mut out = FlowField::zeros(intr.width, intr.height, FlowKind::Rotational);
    match mode {
        RotationMode::Approx => {
            for row in 0..intr.height {
                for col in 0..intr.width {
                    let (x, y) = intr.offset(col, row);
                    out.set(col, row, rotational_flow_approx_at(f, x, y, rot));
                }
            }
        }
        RotationMode::Exact => {
            let r = point_rotation(rot);
            for row in 0..intr.height {
                for col in 0..intr.width {
                    let (x, y) = intr.offset(col, row);
                    let v = reproject(f, x, y, &r).ok_or_else(|| {
                        Error::domain("rotation moves a pixel ray behind the camera")
                    })?;
                    out.set(col, row, v);
                }
            }
        }
    }
    Ok(out)
}

/// Unnormalized translational direction `(-fU + xW, -fV + yW)`; dividing by
/// depth gives the translational flow.
#[inline]
pub fn translational_direction_at(f: f64, x: f64, y: f64, t: Translation) -> [f64; 2] {
    [-f * t.u + x * t.w, -f * t.v + y * t.w]
}

#[inline]
pub fn translational_flow_at(f: f64, x: f64, y: f64, t: Translation, depth: f64) -> [f64; 2] {
    let d = translational_direction_at(f, x, y, t);
    [d[0] / depth, d[1] / depth]
}

pub fn translational_flow(
    intr: &CameraIntrinsics,
    trans: Translation,
    depth: &DepthMap,
) -> Result<FlowField> {
    intr.validate()?;
    trans.validate()?;
    if depth.dims() != intr.dims() {
        return Err(Error::DimensionMismatch {
            expected: intr.dims(),
            actual: depth.dims(),
        });
    }
    let f = intr.focal_length;
    Ok(FlowField::from_fn(
        intr.width,
        intr.height,
        FlowKind::Translational,
        |col, row| {
            let (x, y) = intr.offset(col, row);
            translational_flow_at(f, x, y, trans, depth.get(col, row))
        },
    ))
}

/// Rotation-compensated flow `o - v_r(A, B, C)`.
pub fn compensate(
    observed: &FlowField,
    intr: &CameraIntrinsics,
    rot: Rotation,
    mode: RotationMode,
) -> Result<FlowField> {
    if !matches!(observed.kind(), FlowKind::Full | FlowKind::Observed) {
        return Err(Error::domain(format!(
            "compensation expects full or observed flow, got {:?}",
            observed.kind()
        )));
    }
    observed.ensure_dims(intr.dims())?;
    let vr = rotational_flow(intr, rot, mode)?;
    let kind = match observed.kind() {
        FlowKind::Full => FlowKind::Translational,
        _ => FlowKind::Observed,
    };
    observed.sub(&vr, kind)
}

/// Per-pixel direction of translational flow. Depends on the translation
/// direction and intrinsics only; the focus of expansion is flagged invalid.
/// `magnitude` holds the unnormalized length `|(-fU + xW, -fV + yW)|`.
pub fn angle_field(intr: &CameraIntrinsics, trans: Translation) -> Result<AngleMagnitude> {
    intr.validate()?;
    trans.validate()?;
    let f = intr.focal_length;
    let n = intr.pixel_count();
    let mut unit_dir = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for row in 0..intr.height {
        for col in 0..intr.width {
            let (x, y) = intr.offset(col, row);
            let d = translational_direction_at(f, x, y, trans);
            let len = d[0].hypot(d[1]);
            magnitude.push(len);
            if len > 0.0 {
                unit_dir.push([d[0] / len, d[1] / len]);
                valid.push(true);
            } else {
                unit_dir.push([0.0, 0.0]);
                valid.push(false);
            }
        }
    }
    Ok(AngleMagnitude {
        width: intr.width,
        height: intr.height,
        unit_dir,
        magnitude,
        valid,
    })
}

pub fn to_angle_magnitude(flow: &FlowField) -> AngleMagnitude {
    let n = flow.data().len();
    let mut unit_dir = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for p in flow.data() {
        let m = p[0].hypot(p[1]);
        magnitude.push(m);
        if m > 0.0 {
            unit_dir.push([p[0] / m, p[1] / m]);
            valid.push(true);
        } else {
            unit_dir.push([0.0, 0.0]);
            valid.push(false);
        }
    }
    AngleMagnitude {
        width: flow.width(),
        height: flow.height(),
        unit_dir,
        magnitude,
        valid,
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn intr100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, (60.0, 40.0), 121, 81).unwrap()
    }

    #[test]
    fn zero_rotation_gives_zero_field() {
        for mode in [RotationMode::Approx, RotationMode::Exact] {
            let v = rotational_flow(&intr100(), Rotation::ZERO, mode).unwrap();
            assert!(v.data().iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
        }
    }

    #[test]
    fn pitch_and_roll_hand_values() {
        let v = rotational_flow_approx_at(100.0, 50.0, 20.0, Rotation::new(0.0, 0.01, 0.0));
        assert_abs_diff_eq!(v[0], -1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -0.10, epsilon = 1e-12);
        let v = rotational_flow_approx_at(100.0, 50.0, 20.0, Rotation::new(0.0, 0.0, 0.01));
        assert_abs_diff_eq!(v[0], 0.20, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -0.50, epsilon = 1e-12);

        // Same values through the field path: pixel (110, 60) sits at offset (50, 20).
        let field =
            rotational_flow(&intr100(), Rotation::new(0.0, 0.01, 0.0), RotationMode::Approx)
                .unwrap();
        let p = field.get(110, 60);
        assert_abs_diff_eq!(p[0], -1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], -0.10, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_rotation_rejected() {
        let err = rotational_flow(&intr100(), Rotation::new(2.0, 0.0, 0.0), RotationMode::Approx);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn translational_hand_values() {
        let t = Translation::new(1.0, 0.0, 0.0).unwrap();
        let v = translational_flow_at(100.0, 10.0, 10.0, t, 2.0);
        assert_eq!(v, [-50.0, 0.0]);
        let v = translational_flow_at(100.0, 0.0, 0.0, Translation::FORWARD, 7.3);
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn doubling_depth_halves_magnitude_keeps_angle() {
        let intr = intr100();
        let t = Translation::from_vector(0.3, -0.2, 0.9).unwrap();
        let z = DepthMap::from_fn(intr.width, intr.height, |c, r| 1.0 + (c + 2 * r) as f64 * 0.01)
            .unwrap();
        let a = translational_flow(&intr, t, &z).unwrap();
        let b = translational_flow(&intr, t, &z.scaled(2.0).unwrap()).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(p[0] * 0.5, q[0], epsilon = 1e-12);
            assert_abs_diff_eq!(p[1] * 0.5, q[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn translational_rejects_mismatched_depth() {
        let z = DepthMap::constant(10, 10, 1.0).unwrap();
        assert!(matches!(
            translational_flow(&intr100(), Translation::FORWARD, &z),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compensation_cancels_rotation() {
        let intr = intr100();
        let rot = Rotation::new(0.003, -0.007, 0.002);
        let t = Translation::from_vector(0.1, 0.2, 1.0).unwrap();
        let z = DepthMap::from_fn(intr.width, intr.height, |c, r| 3.0 + ((c * r) % 7) as f64)
            .unwrap();
        let vt = translational_flow(&intr, t, &z).unwrap();
        let vr = rotational_flow(&intr, rot, RotationMode::Approx).unwrap();
        let v = vr.add(&vt, FlowKind::Full).unwrap();
        let back = compensate(&v, &intr, rot, RotationMode::Approx).unwrap();
        assert_eq!(back.kind(), FlowKind::Translational);
        assert!(back.max_abs_diff(&vt) < 1e-12);

        let same = compensate(&v, &intr, Rotation::ZERO, RotationMode::Approx).unwrap();
        assert_eq!(same.data(), v.data());
    }

    #[test]
    fn compensation_rejects_translational_input() {
        let intr = intr100();
        let f = FlowField::zeros(intr.width, intr.height, FlowKind::Translational);
        assert!(compensate(&f, &intr, Rotation::ZERO, RotationMode::Approx).is_err());
    }

    #[test]
    fn forward_translation_is_radial() {
        let intr = CameraIntrinsics::new(100.0, (10.0, 10.0), 21, 21).unwrap();
        let am = angle_field(&intr, Translation::FORWARD).unwrap();
        let idx = |c: usize, r: usize| r * 21 + c;
        assert_eq!(am.unit_dir[idx(15, 10)], [1.0, 0.0]);
        assert_eq!(am.unit_dir[idx(10, 17)], [0.0, 1.0]);
        assert_eq!(am.unit_dir[idx(3, 10)], [-1.0, 0.0]);
        assert!(!am.valid[idx(10, 10)]);
        assert_eq!(am.valid.iter().filter(|v| !**v).count(), 1);
    }

    #[test]
    fn lateral_translation_is_constant() {
        let am = angle_field(&intr100(), Translation::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(am.valid.iter().all(|&v| v));
        assert!(am.unit_dir.iter().all(|d| *d == [-1.0, 0.0]));
    }

    #[test]
    fn angle_magnitude_basics() {
        let f = FlowField::from_vec(2, 1, vec![[3.0, 4.0], [0.0, 0.0]], FlowKind::Observed)
            .unwrap();
        let am = to_angle_magnitude(&f);
        assert_eq!(am.magnitude, vec![5.0, 0.0]);
        assert_abs_diff_eq!(am.unit_dir[0][0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(am.unit_dir[0][1], 0.8, epsilon = 1e-15);
        assert_eq!(am.valid, vec![true, false]);
        assert_eq!(am.angle(1), None);
    }

    #[test]
    fn exact_mode_reprojects() {
        // Pure roll about the optical axis rotates pixel positions rigidly.
        let c = 0.2_f64;
        let v = rotational_flow_at(100.0, 30.0, 0.0, Rotation::new(0.0, 0.0, c), RotationMode::Exact)
            .unwrap();
        // Points rotate by -c in the image: (30, 0) -> (30 cos c, -30 sin c).
        assert_abs_diff_eq!(v[0], 30.0 * c.cos() - 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -30.0 * c.sin(), epsilon = 1e-12);
    }
}
