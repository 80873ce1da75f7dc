use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Ray};

/// A triangulated ball position. `t` in microseconds; `residual` is the gap
/// between the two rays at closest approach, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallObservation3D {
    pub t: u64,
    pub position: Vector3<f64>,
    pub residual: f64,
}

impl BallObservation3D {
    pub fn new(t: u64, position: Vector3<f64>) -> Self {
        Self {
            t,
            position,
            residual: 0.0,
        }
    }

    pub fn t_secs(&self) -> f64 {
        self.t as f64 * 1e-6
    }
}

/// Midpoint of the common perpendicular between two viewing rays: the
/// least-squares point for two views. `t` is copied into the result.
pub fn triangulate(ray_l: &Ray, ray_r: &Ray, t: u64) -> Result<BallObservation3D, GeometryError> {
    let d1 = ray_l.direction.into_inner();
    let d2 = ray_r.direction.into_inner();
    let b = d1.dot(&d2);
    if b.abs() >= 1.0 - 1e-9 {
        return Err(GeometryError::Degenerate("viewing rays are parallel".into()));
    }
    let w0 = ray_l.origin - ray_r.origin;
    let a = d1.dot(&d1);
    let c = d2.dot(&d2);
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let den = a * c - b * b;
    let s = (b * e - c * d) / den;
    let u = (a * e - b * d) / den;
    let p1 = ray_l.at(s);
    let p2 = ray_r.at(u);
    Ok(BallObservation3D {
        t,
        position: (p1 + p2) * 0.5,
        residual: (p1 - p2).norm(),
    })
}
