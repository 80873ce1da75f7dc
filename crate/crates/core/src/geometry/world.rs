//! World frame and ball physics shared by the scene renderer and the rally
//! environment. x runs along the table toward the robot, y across it, z up;
//! the origin sits at the table centre on the playing surface.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{BallisticParams, FlightStage, GRAVITY};
use crate::trig::sin_cos;

pub const BALL_RADIUS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub length: f64,
    pub width: f64,
    pub net_height: f64,
    /// How far the net extends past each side line.
    pub net_overhang: f64,
}

impl Default for Table {
    fn default() -> Self {
        Self {
            length: 2.74,
            width: 1.525,
            net_height: 0.1525,
            net_overhang: 0.1525,
        }
    }
}

impl Table {
    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    pub fn on_surface(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_length() && y.abs() <= self.half_width()
    }

    /// Distance from `(x, y)` to the opponent half `[-L/2, 0] x [-W/2, W/2]`
    /// (zero inside it).
    pub fn distance_to_opponent_half(&self, x: f64, y: f64) -> f64 {
        let dx = if x < -self.half_length() {
            -self.half_length() - x
        } else if x > 0.0 {
            x
        } else {
            0.0
        };
        let dy = (y.abs() - self.half_width()).max(0.0);
        dx.hypot(dy)
    }
}

/// Table bounce: vertical velocity reversed and scaled by the restitution,
/// horizontal velocity scaled by `1 - friction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BounceModel {
    pub restitution_z: f64,
    pub friction_tangential: f64,
}

impl Default for BounceModel {
    fn default() -> Self {
        Self {
            restitution_z: 0.87,
            friction_tangential: 0.05,
        }
    }
}

impl BounceModel {
    pub fn apply(&self, v: Vector3<f64>) -> Vector3<f64> {
        let k = 1.0 - self.friction_tangential;
        Vector3::new(v.x * k, v.y * k, -self.restitution_z * v.z)
    }
}

/// Time after `params.t_ref` at which the ball centre next descends to height
/// `z`, if it does.
pub fn time_to_height(params: &BallisticParams, z: f64) -> Option<f64> {
    let (z0, vz) = (params.position.z, params.velocity.z);
    let disc = vz * vz + 2.0 * GRAVITY * (z0 - z);
    if disc < 0.0 {
        return None;
    }
    let tau = (vz + disc.sqrt()) / GRAVITY;
    (tau >= 0.0).then_some(tau)
}

/// Piecewise-ballistic flight with table bounces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    /// Segment `i` is valid from its `t_ref` up to the next segment's `t_ref`.
    pub segments: Vec<BallisticParams>,
}

impl Flight {
    /// Integrates from `start` until `t_end`, bouncing on the table surface.
    pub fn simulate(start: BallisticParams, t_end: f64, table: &Table, bounce: &BounceModel) -> Self {
        let mut segments = vec![start];
        let mut current = start;
        while let Some(tau) = time_to_height(&current, BALL_RADIUS) {
            let t_hit = current.t_ref + tau;
            if t_hit >= t_end || tau < 1e-9 && current.velocity.z >= 0.0 {
                break;
            }
            let p = current.position_at(t_hit);
            if !table.on_surface(p.x, p.y) {
                break;
            }
            let v_in = current.velocity_at(t_hit);
            if v_in.z.abs() < 1e-3 {
                break;
            }
            current = BallisticParams {
                t_ref: t_hit,
                position: Vector3::new(p.x, p.y, BALL_RADIUS),
                velocity: bounce.apply(v_in),
                stage: FlightStage::PostBounce,
            };
            segments.push(current);
        }
        Self { segments }
    }

    fn segment(&self, t: f64) -> &BallisticParams {
        self.segments
            .iter()
            .rev()
            .find(|s| s.t_ref <= t)
            .unwrap_or(&self.segments[0])
    }

    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        self.segment(t).position_at(t)
    }

    pub fn velocity_at(&self, t: f64) -> Vector3<f64> {
        self.segment(t).velocity_at(t)
    }

    pub fn bounce_times(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.t_ref).collect()
    }

    /// First crossing of the plane `x = plane_x` after `after` (seconds).
    pub fn plane_crossing(&self, plane_x: f64, after: f64) -> Option<(f64, Vector3<f64>, Vector3<f64>)> {
        for (i, seg) in self.segments.iter().enumerate() {
            let vx = seg.velocity.x;
            if vx == 0.0 {
                continue;
            }
            let t = seg.t_ref + (plane_x - seg.position.x) / vx;
            let end = self.segments.get(i + 1).map_or(f64::INFINITY, |s| s.t_ref);
            if t >= seg.t_ref && t < end && t > after {
                return Some((t, seg.position_at(t), seg.velocity_at(t)));
            }
        }
        None
    }
}

/// Launch velocity of the given speed whose first descent to table height
/// lands at `land_x`, heading `azimuth` radians off the +x axis. Picks the
/// flattest such trajectory; `None` when the speed is too low to get there.
pub fn aim_velocity(start: Vector3<f64>, speed: f64, land_x: f64, azimuth: f64) -> Option<Vector3<f64>> {
    let (sa, ca) = sin_cos(azimuth);
    let velocity = |elev: f64| {
        let (se, ce) = sin_cos(elev);
        let h = speed * ce;
        Vector3::new(h * ca, h * sa, speed * se)
    };
    let landing = |elev: f64| {
        let params = BallisticParams {
            t_ref: 0.0,
            position: start,
            velocity: velocity(elev),
            stage: FlightStage::PreBounce,
        };
        time_to_height(&params, BALL_RADIUS).map(|tau| params.position_at(tau).x)
    };
    let reach = |elev: f64| landing(elev).map_or(f64::NEG_INFINITY, |x| x - land_x);
    let (mut lo, mut hi) = (-1.2, 1.2);
    let steps = 240;
    let mut found = false;
    for i in 1..=steps {
        let e = -1.2 + 2.4 * i as f64 / steps as f64;
        if reach(e) >= 0.0 {
            hi = e;
            found = true;
            break;
        }
        lo = e;
    }
    if !found {
        return None;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reach(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(velocity(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounce_reflects_vertical() {
        let b = BounceModel::default();
        let v = b.apply(Vector3::new(3.0, 0.5, -2.0));
        assert!((v.z - 0.87 * 2.0).abs() < 1e-12);
        assert!((v.x - 3.0 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn flight_bounces_once_on_table() {
        let start = BallisticParams {
            t_ref: 0.0,
            position: Vector3::new(-0.5, 0.0, 0.4),
            velocity: Vector3::new(4.0, 0.0, 0.0),
            stage: FlightStage::PreBounce,
        };
        let f = Flight::simulate(start, 1.0, &Table::default(), &BounceModel::default());
        let bounces = f.bounce_times();
        assert_eq!(bounces.len(), 1);
        let tb = bounces[0];
        let expect = ((0.4 - BALL_RADIUS) * 2.0 / GRAVITY).sqrt();
        assert!((tb - expect).abs() < 1e-12);
        let v_in = start.velocity_at(tb);
        let v_out = f.velocity_at(tb + 1e-12);
        assert!((v_out.z + 0.87 * v_in.z).abs() < 1e-6);
        assert!(f.position_at(tb).z - BALL_RADIUS < 1e-12);
        let (tc, p, _) = f.plane_crossing(1.6, 0.0).unwrap();
        assert!(tc > tb && (p.x - 1.6).abs() < 1e-12);
    }

    #[test]
    fn aimed_serve_lands_on_target() {
        let start = Vector3::new(-0.7, 0.1, 0.35);
        for speed in [3.0, 4.0, 5.0] {
            let v = aim_velocity(start, speed, 0.5, 0.05).unwrap();
            assert!((v.norm() - speed).abs() < 1e-9);
            let p = BallisticParams {
                t_ref: 0.0,
                position: start,
                velocity: v,
                stage: FlightStage::PreBounce,
            };
            let tau = time_to_height(&p, BALL_RADIUS).unwrap();
            assert!((p.position_at(tau).x - 0.5).abs() < 1e-6);
        }
        assert!(aim_velocity(start, 0.5, 1.0, 0.0).is_none());
    }

    #[test]
    fn opponent_half_distance() {
        let t = Table::default();
        assert_eq!(t.distance_to_opponent_half(-0.5, 0.0), 0.0);
        assert!((t.distance_to_opponent_half(-1.67, 0.0) - 0.3).abs() < 1e-12);
        assert!((t.distance_to_opponent_half(0.2, 0.0) - 0.2).abs() < 1e-12);
    }
}
