use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{BallObservation3D, GeometryError};

/// Gravitational acceleration along -z, m/s².
pub const GRAVITY: f64 = 9.81;

/// Minimum number of observations for a trajectory fit.
pub const MIN_FIT_OBSERVATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlightStage {
    PreBounce,
    PostBounce,
}

/// Gravity-only flight state anchored at `t_ref` (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallisticParams {
    pub t_ref: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub stage: FlightStage,
}

impl BallisticParams {
    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        let tau = t - self.t_ref;
        self.position + self.velocity * tau - Vector3::new(0.0, 0.0, 0.5 * GRAVITY * tau * tau)
    }

    pub fn velocity_at(&self, t: f64) -> Vector3<f64> {
        let tau = t - self.t_ref;
        self.velocity - Vector3::new(0.0, 0.0, GRAVITY * tau)
    }

    /// Same flight, re-anchored at `t`.
    pub fn advanced_to(&self, t: f64) -> Self {
        Self {
            t_ref: t,
            position: self.position_at(t),
            velocity: self.velocity_at(t),
            stage: self.stage,
        }
    }
}

/// Ball state where it meets the hitting plane `x = const`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitState {
    pub t_c: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub stage: FlightStage,
}

impl HitState {
    /// `(p_c, v_c)` as the six-dimensional policy state.
    pub fn as_state(&self) -> [f64; 6] {
        let (p, v) = (self.position, self.velocity);
        [p.x, p.y, p.z, v.x, v.y, v.z]
    }
}

/// Least-squares fit of `x(t)`, `y(t)` linear and `z(t) = z0 + vz*t - g*t²/2`
/// with `g` fixed. Parameters are reported at the time of the last observation.
pub fn fit_trajectory(obs: &[BallObservation3D]) -> Result<BallisticParams, GeometryError> {
    if obs.len() < MIN_FIT_OBSERVATIONS {
        return Err(GeometryError::InsufficientData {
            need: MIN_FIT_OBSERVATIONS,
            got: obs.len(),
        });
    }
    if obs.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(GeometryError::NotIncreasing);
    }
    let t_ref = obs[obs.len() - 1].t_secs();
    let n = obs.len() as f64;
    let taus: Vec<f64> = obs.iter().map(|o| o.t_secs() - t_ref).collect();
    let tau_mean = taus.iter().sum::<f64>() / n;
    let stt: f64 = taus.iter().map(|t| (t - tau_mean).powi(2)).sum();

    // independent straight-line fits per axis, z corrected for gravity
    let line = |values: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        let vals: Vec<f64> = values.collect();
        let mean = vals.iter().sum::<f64>() / n;
        let sty: f64 = taus
            .iter()
            .zip(&vals)
            .map(|(t, y)| (t - tau_mean) * (y - mean))
            .sum();
        let slope = sty / stt;
        (mean - slope * tau_mean, slope)
    };
    let (x0, vx) = line(&mut obs.iter().map(|o| o.position.x));
    let (y0, vy) = line(&mut obs.iter().map(|o| o.position.y));
    let (z0, vz) = line(
        &mut obs
            .iter()
            .zip(&taus)
            .map(|(o, t)| o.position.z + 0.5 * GRAVITY * t * t),
    );
    Ok(BallisticParams {
        t_ref,
        position: Vector3::new(x0, y0, z0),
        velocity: Vector3::new(vx, vy, vz),
        stage: FlightStage::PreBounce,
    })
}

/// Root-mean-square distance between observations and the fitted flight.
pub fn fit_residual(params: &BallisticParams, obs: &[BallObservation3D]) -> f64 {
    if obs.is_empty() {
        return 0.0;
    }
    let ss: f64 = obs
        .iter()
        .map(|o| (params.position_at(o.t_secs()) - o.position).norm_squared())
        .sum();
    (ss / obs.len() as f64).sqrt()
}

/// Intersects the ballistic flight with the plane `x = hitting_plane_x`.
pub fn predict_hit(params: &BallisticParams, hitting_plane_x: f64) -> Result<HitState, GeometryError> {
    let vx = params.velocity.x;
    let dx = hitting_plane_x - params.position.x;
    if vx == 0.0 || dx / vx < 0.0 {
        return Err(GeometryError::NoIntercept);
    }
    let t_c = params.t_ref + dx / vx;
    let mut position = params.position_at(t_c);
    position.x = hitting_plane_x;
    Ok(HitState {
        t_c,
        position,
        velocity: params.velocity_at(t_c),
        stage: params.stage,
    })
}

/// Looks for a table bounce: the vertical velocity, estimated over a sliding
/// three-sample window, turns from negative to non-negative while the ball is
/// within 5 cm of the table surface. Returns the bounce time in seconds,
/// refined by intersecting the descending and ascending chords.
pub fn detect_bounce(obs: &[BallObservation3D], table_z: f64) -> Option<f64> {
    const BAND: f64 = 0.05;
    if obs.len() < 4 {
        return None;
    }
    let vz = |i: usize| {
        (obs[i + 1].position.z - obs[i - 1].position.z) / (obs[i + 1].t_secs() - obs[i - 1].t_secs())
    };
    for i in 2..obs.len() - 1 {
        let (before, after) = (vz(i - 1), vz(i));
        if !(before < 0.0 && after >= 0.0) {
            continue;
        }
        // lowest sample of the flip neighbourhood
        let k = (i - 1..=i)
            .min_by(|&a, &b| obs[a].position.z.total_cmp(&obs[b].position.z))
            .unwrap();
        if obs[k].position.z > table_z + BAND {
            continue;
        }
        return Some(refine_bounce_time(obs, k));
    }
    None
}

fn refine_bounce_time(obs: &[BallObservation3D], k: usize) -> f64 {
    let at = |i: usize| (obs[i].t_secs(), obs[i].position.z);
    let fallback = at(k).0;
    if k < 1 || k + 1 >= obs.len() {
        return fallback;
    }
    // descending chord through the two samples ending at or before k,
    // ascending chord through the two starting at or after k
    let pick = |a: usize, b: usize| {
        let (t0, z0) = at(a);
        let (t1, z1) = at(b);
        let slope = (z1 - z0) / (t1 - t0);
        (slope, z0 - slope * t0)
    };
    let candidates = [
        (k.saturating_sub(2), k - 1, k, k + 1),
        (k - 1, k, k + 1, (k + 2).min(obs.len() - 1)),
    ];
    for (a, b, c, d) in candidates {
        if a == b || c == d {
            continue;
        }
        let (s1, i1) = pick(a, b);
        let (s2, i2) = pick(c, d);
        if s1 < 0.0 && s2 > 0.0 {
            let t = (i2 - i1) / (s1 - s2);
            if t >= at(b).0 && t <= at(c).0 {
                return t;
            }
        }
    }
    fallback
}
