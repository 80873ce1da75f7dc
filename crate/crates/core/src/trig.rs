//! Sine and cosine that give the same bits in every build.
//!
//! The compiler may merge a `sin` and a `cos` of the same argument into one
//! `sincos` call, depending on inlining, and the platform `sincos` can round
//! differently from `sin`. Training amplifies a one-ulp difference until two
//! builds of the same run diverge, so everything on the simulation and
//! rendering paths goes through these instead.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};

pub fn sin_cos(x: f64) -> (f64, f64) {
    (libm::sin(x), libm::cos(x))
}

/// Rotation by `angle` about a unit `axis`.
pub fn axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> UnitQuaternion<f64> {
    let (s, c) = sin_cos(angle * 0.5);
    UnitQuaternion::new_unchecked(Quaternion::from_parts(c, axis.into_inner() * s))
}
