//! CSV records: per-frame motion estimates and evaluation reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::camera::{CameraMotion, Rotation, Translation};
use crate::error::Result;
use crate::estimator::EstimateResult;

/// One row of an estimates file. Rotation rates are in degrees.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub scene: String,
    pub frame: usize,
    pub a_deg: f64,
    pub b_deg: f64,
    pub c_deg: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub nll: f64,
    pub start: usize,
    pub degenerate: bool,
}

impl EstimateRecord {
    pub fn new(scene: impl Into<String>, frame: usize, est: &EstimateResult) -> Self {
        let [a_deg, b_deg, c_deg] = est.motion.rotation.to_degrees();
        let t = est.motion.translation;
        Self {
            scene: scene.into(),
            frame,
            a_deg,
            b_deg,
            c_deg,
            u: t.u,
            v: t.v,
            w: t.w,
            nll: est.nll,
            start: est.start_point_used,
            degenerate: est.degenerate,
        }
    }

    /// The motion, with the translation renormalized to unit length.
    pub fn motion(&self) -> Result<CameraMotion> {
        CameraMotion::new(
            Rotation::from_degrees(self.a_deg, self.b_deg, self.c_deg),
            Translation::from_vector(self.u, self.v, self.w)?,
        )
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn write_estimates(records: &[EstimateRecord], path: &Path) -> Result<()> {
    write_atomic(path, &to_csv(records)?)
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Writes any serializable rows, e.g. an evaluation report.
pub fn write_report<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    write_atomic(path, &to_csv(rows)?)
}
