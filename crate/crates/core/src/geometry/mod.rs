//! Stereo triangulation and two-stage (pre/post-bounce) trajectory prediction.

mod camera;
mod stereo;
mod trajectory;
mod triangulate;
pub mod world;

pub use camera::{pixel_to_ray, CameraModel, Ray};
pub use stereo::{join_detections, triangulate_detections, StereoRig};
pub use trajectory::{
    detect_bounce, fit_residual, fit_trajectory, predict_hit, BallisticParams, FlightStage, HitState,
    GRAVITY, MIN_FIT_OBSERVATIONS,
};
pub use triangulate::{triangulate, BallObservation3D};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use world::{BounceModel, Flight, Table};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("need at least {need} observations, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("observation timestamps must be strictly increasing")]
    NotIncreasing,
    #[error("trajectory never reaches the hitting plane")]
    NoIntercept,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub hitting_plane_x: f64,
    pub table_z: f64,
    /// Observations used for the early, pre-bounce estimate.
    pub pre_bounce_obs: usize,
    /// Post-bounce observations used for the refined estimate; `None` uses
    /// every post-bounce observation received.
    pub post_bounce_obs: Option<usize>,
    /// Observations closer than this to the bounce (seconds) are left out of
    /// either fit.
    pub bounce_guard: f64,
    pub table: Table,
    pub bounce: BounceModel,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            hitting_plane_x: 1.6,
            table_z: 0.0,
            pre_bounce_obs: MIN_FIT_OBSERVATIONS,
            post_bounce_obs: None,
            bounce_guard: 0.002,
            table: Table::default(),
            bounce: BounceModel::default(),
        }
    }
}

/// Output of [`predict_from_observations`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pre_bounce: Option<HitState>,
    pub bounce_time: Option<f64>,
    pub post_bounce: Option<HitState>,
}

impl Prediction {
    /// The most refined estimate available.
    pub fn best(&self) -> Option<&HitState> {
        self.post_bounce.as_ref().or(self.pre_bounce.as_ref())
    }
}

/// Two-stage prediction: the first observations give an early estimate that
/// is carried through the modelled table bounce; once a bounce is seen the
/// post-bounce observations are refitted for a refined estimate.
pub fn predict_from_observations(obs: &[BallObservation3D], cfg: &PredictorConfig) -> Prediction {
    // anything seen past the plane says nothing about reaching it
    let cut = obs.partition_point(|o| o.position.x < cfg.hitting_plane_x);
    let obs = &obs[..cut];
    let bounce_time = detect_bounce(obs, cfg.table_z);
    let before = |o: &&BallObservation3D| bounce_time.is_none_or(|tb| o.t_secs() < tb - cfg.bounce_guard);
    let pre: Vec<_> = obs.iter().filter(before).take(cfg.pre_bounce_obs).copied().collect();

    let pre_bounce = fit_trajectory(&pre).ok().and_then(|params| {
        if bounce_time.is_some() || params.velocity.z < 0.0 {
            // carry the early fit through the modelled bounce
            let flight = Flight::simulate(params, params.t_ref + 5.0, &cfg.table, &cfg.bounce);
            flight
                .plane_crossing(cfg.hitting_plane_x, params.t_ref)
                .map(|(t_c, mut position, velocity)| {
                    position.x = cfg.hitting_plane_x;
                    HitState {
                        t_c,
                        position,
                        velocity,
                        stage: FlightStage::PreBounce,
                    }
                })
        } else {
            predict_hit(&params, cfg.hitting_plane_x).ok()
        }
    });

    let post_bounce = bounce_time.and_then(|tb| {
        let post: Vec<_> = obs
            .iter()
            .filter(|o| o.t_secs() > tb + cfg.bounce_guard)
            .take(cfg.post_bounce_obs.unwrap_or(usize::MAX))
            .copied()
            .collect();
        // refer the fit to its first sample so a window ending right at the
        // plane still yields a forward crossing
        let mut params = fit_trajectory(&post).ok()?.advanced_to(post[0].t_secs());
        params.stage = FlightStage::PostBounce;
        predict_hit(&params, cfg.hitting_plane_x).ok()
    });

    Prediction {
        pre_bounce,
        bounce_time,
        post_bounce,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn two_stage_prediction_on_exact_flight() {
        let start = BallisticParams {
            t_ref: 0.0,
            position: Vector3::new(-0.6, 0.1, 0.35),
            velocity: Vector3::new(4.0, -0.2, 0.3),
            stage: FlightStage::PreBounce,
        };
        let cfg = PredictorConfig::default();
        let flight = Flight::simulate(start, 2.0, &cfg.table, &cfg.bounce);
        let (t_true, p_true, v_true) = flight.plane_crossing(cfg.hitting_plane_x, 0.0).unwrap();
        let obs: Vec<_> = (0..)
            .map(|i| i as f64 * 0.01)
            .take_while(|&t| t < t_true - 0.03)
            .map(|t| BallObservation3D::new((t * 1e6).round() as u64, flight.position_at(t)))
            .collect();
        let pred = predict_from_observations(&obs, &cfg);
        let tb = flight.bounce_times()[0];
        assert!((pred.bounce_time.unwrap() - tb).abs() < 0.01);
        for hit in [pred.pre_bounce.unwrap(), pred.post_bounce.unwrap()] {
            assert!((hit.t_c - t_true).abs() < 1e-6, "{hit:?}");
            assert!((hit.position - p_true).norm() < 1e-6);
            assert!((hit.velocity - v_true).norm() < 1e-6);
            assert_eq!(hit.position.x, cfg.hitting_plane_x);
        }
        assert_eq!(pred.best().unwrap().stage, FlightStage::PostBounce);
    }
}
