//! Parametric 3D scenes rendered into labelled event streams: a bouncing ball,
//! optional moving distractors and thermal noise.

mod render;

pub use render::{simulate_events, simulate_stereo, EventSimulator, SimOutput, StereoOutput};

use std::io::Write;
use std::path::Path;

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventError, SensorDims};
use crate::geometry::world::{aim_velocity, BounceModel, Flight, Table, BALL_RADIUS};
use crate::geometry::{BallisticParams, CameraModel, FlightStage, StereoRig};
use crate::trig::axis_angle;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("unknown scene '{0}'")]
    UnknownScene(String),
    #[error("simulation step must be at most 1 ms, got {0} s")]
    StepTooLarge(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Events(#[from] EventError),
}

/// Whether an object is brighter or darker than the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shade {
    Bright,
    Dark,
}

impl Shade {
    pub fn sign(self) -> f64 {
        match self {
            Shade::Bright => 1.0,
            Shade::Dark => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub radius: f64,
    pub shade: Shade,
}

/// Distractor geometry in its local frame, centred on the local origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Flat rectangle spanned by two half-edge vectors.
    Rect { half_u: Vector3<f64>, half_v: Vector3<f64> },
    /// Segment from `-half_axis` to `+half_axis`, swept by a sphere.
    Capsule { half_axis: Vector3<f64>, radius: f64 },
}

/// A moving shape. Its pose at time `t` is a rotation by
/// `swing_amplitude * sin(2π swing_hz t + swing_phase)` about `swing_axis`
/// through `anchor + velocity t`; the shape sits at `arm` in the rotating
/// frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distractor {
    pub shape: Shape,
    pub anchor: Vector3<f64>,
    #[serde(default)]
    pub velocity: Vector3<f64>,
    #[serde(default = "Vector3::z")]
    pub swing_axis: Vector3<f64>,
    #[serde(default)]
    pub swing_amplitude: f64,
    #[serde(default)]
    pub swing_hz: f64,
    #[serde(default)]
    pub swing_phase: f64,
    #[serde(default)]
    pub arm: Vector3<f64>,
    pub shade: Shade,
}

impl Distractor {
    pub fn pose(&self, t: f64) -> (Vector3<f64>, Rotation3<f64>) {
        let angle = self.swing_amplitude * libm::sin(std::f64::consts::TAU * self.swing_hz * t + self.swing_phase);
        let rot = Unit::try_new(self.swing_axis, 1e-12)
            .map_or_else(Rotation3::identity, |axis| axis_angle(&axis, angle).to_rotation_matrix());
        let origin = self.anchor + self.velocity * t;
        (origin + rot * self.arm, rot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub ball: BallSpec,
    #[serde(default)]
    pub distractors: Vec<Distractor>,
    /// Thermal noise, events per pixel per second.
    pub noise_rate: f64,
    /// Log-intensity change that fires an event.
    pub contrast_threshold: f64,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    /// Log-intensity jump at object silhouettes, in units of the threshold.
    #[serde(default = "default_edge_contrast")]
    pub edge_contrast: f64,
    /// Extra log-intensity at the centre of shaded objects (ball, capsules),
    /// falling off like a lit sphere, in units of the threshold.
    #[serde(default = "default_shading")]
    pub shading: f64,
    #[serde(default)]
    pub table: Table,
    #[serde(default)]
    pub bounce: BounceModel,
}

fn default_edge_contrast() -> f64 {
    2.0
}

fn default_shading() -> f64 {
    32.0
}

impl SceneSpec {
    /// A bright ball on an otherwise empty scene.
    pub fn ball_only(ball: BallSpec, duration: f64, noise_rate: f64, seed: u64) -> Self {
        Self {
            ball,
            distractors: Vec::new(),
            noise_rate,
            contrast_threshold: 0.15,
            duration,
            seed,
            edge_contrast: default_edge_contrast(),
            shading: default_shading(),
            table: Table::default(),
            bounce: BounceModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidScene(m.into()));
        if !(self.ball.radius > 0.0) {
            return bad("ball radius must be positive");
        }
        if !(self.noise_rate >= 0.0) {
            return bad("noise rate must be non-negative");
        }
        if !(self.contrast_threshold > 0.0) {
            return bad("contrast threshold must be positive");
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad("duration must be non-negative");
        }
        if !(self.edge_contrast > 1.0) {
            return bad("edge contrast must exceed one threshold");
        }
        if !(self.shading >= 0.0) {
            return bad("shading must be non-negative");
        }
        Ok(())
    }

    /// Ball flight including table bounces, starting at t = 0.
    pub fn flight(&self) -> Flight {
        let start = BallisticParams {
            t_ref: 0.0,
            position: self.ball.position,
            velocity: self.ball.velocity,
            stage: FlightStage::PreBounce,
        };
        Flight::simulate(start, self.duration.max(0.0) + 1.0, &self.table, &self.bounce)
    }
}

/// Ground truth for one camera at one instant. `t` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub t: u64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub position: Vector3<f64>,
    pub visible: bool,
}

/// Labels of both cameras at one instant; visible only when the ball is
/// fully in view of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoLabel {
    pub t: u64,
    pub left: (f64, f64, f64),
    pub right: (f64, f64, f64),
    pub position: Vector3<f64>,
    pub visible: bool,
}

impl StereoLabel {
    pub fn camera(&self, right: bool) -> GroundTruthLabel {
        let (u, v, r) = if right { self.right } else { self.left };
        GroundTruthLabel {
            t: self.t,
            u,
            v,
            r,
            position: self.position,
            visible: self.visible,
        }
    }
}

pub const LABELS_HEADER: &str = "t,u_left,v_left,r_left,u_right,v_right,r_right,x,y,z,visible";

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[StereoLabel]) -> Result<(), SynthError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{LABELS_HEADER}")?;
    for l in labels {
        writeln!(
            w,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{}",
            l.t,
            l.left.0,
            l.left.1,
            l.left.2,
            l.right.0,
            l.right.1,
            l.right.2,
            l.position.x,
            l.position.y,
            l.position.z,
            l.visible as u8
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<StereoLabel>, SynthError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| SynthError::Events(EventError::Csv(e)))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SynthError::Events(EventError::Csv(e)))?;
        let parse_err = |msg: String| {
            SynthError::Events(EventError::Parse {
                line: i as u64 + 2,
                msg,
            })
        };
        if rec.len() != 11 {
            return Err(parse_err(format!("expected 11 fields, got {}", rec.len())));
        }
        let f = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| parse_err(e.to_string()));
        out.push(StereoLabel {
            t: rec[0].trim().parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            left: (f(1)?, f(2)?, f(3)?),
            right: (f(4)?, f(5)?, f(6)?),
            position: Vector3::new(f(7)?, f(8)?, f(9)?),
            visible: f(10)? != 0.0,
        });
    }
    Ok(out)
}

pub const SENSOR: SensorDims = SensorDims {
    width: 1280,
    height: 720,
};

/// Two cameras behind the robot's end of the table, raised and looking down
/// the table, 3 m apart.
pub fn standard_rig() -> StereoRig {
    let target = Vector3::new(0.5, 0.0, 0.1);
    let up = Vector3::z();
    let cam = |y: f64| CameraModel::look_at(Vector3::new(3.3, y, 1.2), target, up, 1500.0, SENSOR).unwrap();
    StereoRig {
        left: cam(-1.2),
        right: cam(1.2),
    }
}

const DEFAULT_SEED: u64 = 0x7ab1e;

/// Ball launched from the far half toward the robot at `speed`, landing once
/// on the robot's half.
fn incoming_ball(speed: f64, y0: f64, azimuth: f64) -> BallSpec {
    let position = Vector3::new(-0.5, y0, 0.35);
    let velocity = aim_velocity(position, speed, 0.5, azimuth).expect("catalog speeds reach the table");
    BallSpec {
        position,
        velocity,
        radius: BALL_RADIUS,
        shade: Shade::Bright,
    }
}

/// Time at which the ball passes `x` on its way toward the robot.
fn time_past(spec: &SceneSpec, x: f64) -> f64 {
    let flight = spec.flight();
    flight.plane_crossing(x, 0.0).map_or(1.0, |(t, _, _)| t)
}

fn paddle(anchor: Vector3<f64>, hz: f64, phase: f64) -> Distractor {
    Distractor {
        shape: Shape::Rect {
            half_u: Vector3::new(0.0, 0.08, 0.0),
            half_v: Vector3::new(0.0, 0.0, 0.09),
        },
        anchor,
        velocity: Vector3::zeros(),
        swing_axis: Vector3::z(),
        swing_amplitude: 1.0,
        swing_hz: hz,
        swing_phase: phase,
        arm: Vector3::new(0.45, 0.0, 0.0),
        shade: Shade::Dark,
    }
}

fn limb(anchor: Vector3<f64>, hz: f64, phase: f64, shade: Shade) -> Distractor {
    Distractor {
        shape: Shape::Capsule {
            half_axis: Vector3::new(0.0, 0.0, 0.16),
            radius: 0.045,
        },
        anchor,
        velocity: Vector3::zeros(),
        swing_axis: Vector3::x(),
        swing_amplitude: 0.8,
        swing_hz: hz,
        swing_phase: phase,
        arm: Vector3::new(0.0, 0.0, -0.2),
        shade,
    }
}

fn walker(start: Vector3<f64>, velocity: Vector3<f64>) -> Distractor {
    Distractor {
        shape: Shape::Rect {
            half_u: Vector3::new(0.0, 0.22, 0.0),
            half_v: Vector3::new(0.0, 0.0, 0.45),
        },
        anchor: start,
        velocity,
        swing_axis: Vector3::z(),
        swing_amplitude: 0.0,
        swing_hz: 0.0,
        swing_phase: 0.0,
        arm: Vector3::zeros(),
        shade: Shade::Dark,
    }
}

/// The fixed scene catalog: `synth1`-`synth3` are ball-only at 5, 4 and
/// 3 m/s; `synth4*`-`synth7*` add moving distractors.
pub fn standard_scenes() -> Vec<(String, SceneSpec)> {
    standard_scenes_seeded(DEFAULT_SEED)
}

/// The catalog with noise seeds derived from `base_seed`.
pub fn standard_scenes_seeded(base_seed: u64) -> Vec<(String, SceneSpec)> {
    let noise = 10.0;
    let make = |i: u64, speed: f64, y0: f64, az: f64, distractors: Vec<Distractor>| {
        let mut spec = SceneSpec::ball_only(incoming_ball(speed, y0, az), 1.0, noise, base_seed.wrapping_add(i));
        spec.distractors = distractors;
        spec.duration = (time_past(&spec, 1.75) * 1000.0).ceil() / 1000.0;
        spec
    };
    vec![
        ("synth1".into(), make(1, 5.0, 0.05, 0.0, vec![])),
        ("synth2".into(), make(2, 4.0, -0.1, 0.05, vec![])),
        ("synth3".into(), make(3, 3.0, 0.15, -0.06, vec![])),
        (
            "synth4*".into(),
            make(4, 4.0, 0.1, -0.02, vec![paddle(Vector3::new(-1.0, -0.9, 0.45), 1.6, 0.0)]),
        ),
        (
            "synth5*".into(),
            make(5, 5.0, -0.05, 0.02, vec![limb(Vector3::new(-0.6, 1.05, 0.75), 1.8, 0.5, Shade::Bright)]),
        ),
        (
            "synth6*".into(),
            make(
                6,
                3.0,
                0.0,
                0.0,
                vec![
                    paddle(Vector3::new(-1.1, 1.0, 0.5), 1.3, 1.0),
                    limb(Vector3::new(0.4, -1.1, 0.7), 2.2, 0.0, Shade::Dark),
                ],
            ),
        ),
        (
            "synth7*".into(),
            make(
                7,
                4.0,
                -0.1,
                0.03,
                vec![
                    walker(Vector3::new(-2.2, -1.6, 0.5), Vector3::new(0.0, 2.0, 0.0)),
                    paddle(Vector3::new(-1.0, -0.95, 0.4), 1.7, 2.0),
                    limb(Vector3::new(-0.3, 1.1, 0.8), 2.0, 1.5, Shade::Bright),
                ],
            ),
        ),
    ]
}

/// Looks a scene up by name; the trailing `*` of distractor scenes is
/// optional.
pub fn find_scene(name: &str, base_seed: Option<u64>) -> Result<SceneSpec, SynthError> {
    let want = name.trim_end_matches('*');
    standard_scenes_seeded(base_seed.unwrap_or(DEFAULT_SEED))
        .into_iter()
        .find(|(n, _)| n.trim_end_matches('*') == want)
        .map(|(_, s)| s)
        .ok_or_else(|| SynthError::UnknownScene(name.into()))
}
