//! One-step rally environment: a served ball reaches the hitting plane, the
//! racket orientation decides the return, and the landing is sorted into one
//! of four cases.

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::world::{aim_velocity, time_to_height, BounceModel, Flight, Table, BALL_RADIUS};
use crate::geometry::{BallObservation3D, BallisticParams, FlightStage};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("no playable serve after {0} attempts")]
    NoServe(usize),
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.1 > self.0 {
            rng.random_range(self.0..=self.1)
        } else {
            self.0
        }
    }

    fn valid(&self) -> bool {
        self.0.is_finite() && self.1.is_finite() && self.0 <= self.1
    }
}

/// Where serves start and where they are aimed on the robot's half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub x: Range,
    pub y: Range,
    pub z: Range,
    pub land_x: Range,
    pub land_y: Range,
    /// Serves whose ball is lower than this at the hitting plane are redrawn.
    pub min_hit_height: f64,
    pub max_attempts: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            x: Range(-0.6, -0.3),
            y: Range(-0.3, 0.3),
            z: Range(0.3, 0.45),
            land_x: Range(0.35, 0.9),
            land_y: Range(-0.45, 0.45),
            min_hit_height: 0.05,
            max_attempts: 1000,
        }
    }
}

/// Racket contact: the ball's velocity relative to the racket is reflected
/// about the face normal with `restitution`, its tangential part scaled by
/// `1 - friction`. The racket moves along its normal at `swing_speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RacketConfig {
    pub restitution: f64,
    pub friction: f64,
    pub swing_speed: f64,
    /// Face normal in the racket's own frame.
    pub face_normal: Vector3<f64>,
}

impl Default for RacketConfig {
    fn default() -> Self {
        Self {
            restitution: 0.8,
            friction: 0.05,
            swing_speed: 2.0,
            face_normal: Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub table: Table,
    /// Height of the playing surface above the floor.
    pub table_height: f64,
    pub bounce: BounceModel,
    pub racket: RacketConfig,
    pub serve_speed: f64,
    pub serve: ServeConfig,
    /// Landing targets are drawn from this box on the opponent's half.
    pub target_x: Range,
    pub target_y: Range,
    /// Width of the valid landing region around the table.
    pub valid_margin: f64,
    pub hitting_plane_x: f64,
    /// Sampling step of the serve observation stream, seconds.
    pub dt: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            table: Table::default(),
            table_height: 0.76,
            bounce: BounceModel::default(),
            racket: RacketConfig::default(),
            serve_speed: 3.0,
            serve: ServeConfig::default(),
            target_x: Range(-1.0, -0.4),
            target_y: Range(-0.5, 0.5),
            valid_margin: 3.0,
            hitting_plane_x: 1.6,
            dt: 0.01,
        }
    }
}

impl EnvConfig {
    pub fn with_speed(mut self, speed: f64) -> Self {
        self.serve_speed = speed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        let b = &self.bounce;
        if !(b.restitution_z > 0.0 && b.restitution_z <= 1.0) {
            return bad("restitution_z must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&b.friction_tangential) {
            return bad("friction_tangential must be in [0, 1]");
        }
        let r = &self.racket;
        if !(r.restitution >= 0.0 && r.restitution <= 1.0) || !(0.0..=1.0).contains(&r.friction) {
            return bad("racket restitution and friction must be in [0, 1]");
        }
        if !(r.swing_speed >= 0.0) || r.face_normal.norm() < 1e-9 {
            return bad("racket swing speed must be non-negative and the face normal non-zero");
        }
        if !(self.serve_speed > 0.0) {
            return bad("serve_speed must be positive");
        }
        let s = &self.serve;
        if ![s.x, s.y, s.z, s.land_x, s.land_y, self.target_x, self.target_y]
            .iter()
            .all(Range::valid)
        {
            return bad("ranges must be finite with lo <= hi");
        }
        if s.max_attempts == 0 {
            return bad("serve.max_attempts must be positive");
        }
        if !(self.valid_margin > 0.0 && self.dt > 0.0 && self.table_height > 0.0) {
            return bad("valid_margin, dt and table_height must be positive");
        }
        if !(self.hitting_plane_x > 0.0) {
            return bad("hitting plane must lie on the robot side (x > 0)");
        }
        Ok(())
    }

    /// Opponent-half diagonal.
    pub fn d_max(&self) -> f64 {
        self.table.half_length().hypot(self.table.width)
    }

    pub fn d_max2(&self) -> f64 {
        self.table.half_length()
    }

    pub fn d_max3(&self) -> f64 {
        self.valid_margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl BallState {
    /// `(p, v)` flattened, the policy's state vector.
    pub fn as_array(&self) -> [f64; 6] {
        let (p, v) = (self.position, self.velocity);
        [p.x, p.y, p.z, v.x, v.y, v.z]
    }

    /// Reflection across the `y = 0` plane.
    pub fn mirrored(&self) -> Self {
        let m = Vector3::new(1.0, -1.0, 1.0);
        Self {
            position: self.position.component_mul(&m),
            velocity: self.velocity.component_mul(&m),
        }
    }

    fn params(&self) -> BallisticParams {
        BallisticParams {
            t_ref: 0.0,
            position: self.position,
            velocity: self.velocity,
            stage: FlightStage::PostBounce,
        }
    }
}

/// A served ball followed up to the hitting plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Serve {
    pub start: BallState,
    pub bounce_time: f64,
    pub t_hit: f64,
    /// Ball state at the hitting plane.
    pub hit: BallState,
    /// Samples of the flight every `dt` up to the plane.
    pub observations: Vec<BallObservation3D>,
    /// Draws rejected before this serve.
    pub redraws: usize,
}

/// Draws serves until one clears the net, bounces once on the robot's half
/// and reaches the hitting plane high enough to be played.
pub fn serve(cfg: &EnvConfig, rng: &mut impl Rng) -> Result<Serve, SimError> {
    cfg.validate()?;
    let s = &cfg.serve;
    for attempt in 0..s.max_attempts {
        let start = Vector3::new(s.x.sample(rng), s.y.sample(rng), s.z.sample(rng));
        let land = Vector2::new(s.land_x.sample(rng), s.land_y.sample(rng));
        let azimuth = (land.y - start.y).atan2(land.x - start.x);
        let Some(velocity) = aim_velocity(start, cfg.serve_speed, land.x, azimuth) else {
            continue;
        };
        if let Some(mut out) = follow_serve(cfg, BallState { position: start, velocity }) {
            out.redraws = attempt;
            return Ok(out);
        }
    }
    Err(SimError::NoServe(s.max_attempts))
}

fn follow_serve(cfg: &EnvConfig, start: BallState) -> Option<Serve> {
    let p0 = BallisticParams {
        stage: FlightStage::PreBounce,
        ..start.params()
    };
    // must pass over the net
    let t_net = -p0.position.x / p0.velocity.x;
    if !(t_net > 0.0) || p0.position_at(t_net).z < cfg.table.net_height + BALL_RADIUS {
        return None;
    }
    let flight = Flight::simulate(p0, 10.0, &cfg.table, &cfg.bounce);
    let bounces = flight.bounce_times();
    let &bounce_time = bounces.first()?;
    if flight.position_at(bounce_time).x <= 0.0 {
        return None;
    }
    let (t_hit, position, velocity) = flight.plane_crossing(cfg.hitting_plane_x, bounce_time)?;
    if bounces.len() > 1 && bounces[1] < t_hit || position.z < cfg.serve.min_hit_height {
        return None;
    }
    let n = (t_hit / cfg.dt).floor() as usize;
    let observations = (0..=n)
        .map(|k| {
            let t = k as f64 * cfg.dt;
            BallObservation3D::new((t * 1e6).round() as u64, flight.position_at(t))
        })
        .collect();
    Some(Serve {
        start,
        bounce_time,
        t_hit,
        hit: BallState { position, velocity },
        observations,
        redraws: 0,
    })
}

/// Result of racket contact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strike {
    Return(BallState),
    /// The face points away from the incoming ball.
    Whiff,
}

pub fn racket_normal(orientation: &UnitQuaternion<f64>, racket: &RacketConfig) -> Vector3<f64> {
    orientation * racket.face_normal.normalize()
}

pub fn strike(s: &BallState, orientation: &UnitQuaternion<f64>, cfg: &EnvConfig) -> Strike {
    let r = &cfg.racket;
    let n = racket_normal(orientation, r);
    if s.velocity.dot(&n) >= 0.0 {
        return Strike::Whiff;
    }
    let racket_v = n * r.swing_speed;
    let rel = s.velocity - racket_v;
    let vn = rel.dot(&n);
    let normal = n * vn;
    let tangential = rel - normal;
    let out = tangential * (1.0 - r.friction) - normal * r.restitution + racket_v;
    Strike::Return(BallState {
        position: s.position,
        velocity: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum LandingCase {
    /// First contact on the robot's own half.
    OwnHalf = 1,
    /// Caught by the net.
    Net = 2,
    /// First contact off the table.
    Out = 3,
    /// Lands on the opponent's half.
    Returned = 4,
}

impl LandingCase {
    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingOutcome {
    pub case: LandingCase,
    /// Contact point; for a net ball, `z` is the height at the net.
    pub f: Vector3<f64>,
    /// Ball velocity at contact.
    pub velocity: Vector3<f64>,
    /// Horizontal distance from the contact point to the target.
    pub d: f64,
    /// Distance from the landing point to the net line (own-half case).
    pub d2: f64,
    /// Distance from the contact point to the opponent half, capped at
    /// `d_max3` (out case).
    pub d3: f64,
    pub d_max: f64,
    pub d_max2: f64,
    pub d_max3: f64,
}

fn outcome(cfg: &EnvConfig, case: LandingCase, f: Vector3<f64>, velocity: Vector3<f64>, target: Vector2<f64>) -> LandingOutcome {
    let d = (Vector2::new(f.x, f.y) - target).norm();
    let d2 = if case == LandingCase::OwnHalf { f.x.max(0.0) } else { 0.0 };
    let d3 = if case == LandingCase::Out {
        let inside = f.x.abs() <= cfg.table.half_length() + cfg.valid_margin
            && f.y.abs() <= cfg.table.half_width() + cfg.valid_margin;
        if inside {
            cfg.table.distance_to_opponent_half(f.x, f.y).min(cfg.d_max3())
        } else {
            cfg.d_max3()
        }
    } else {
        0.0
    };
    LandingOutcome {
        case,
        f,
        velocity,
        d,
        d2,
        d3,
        d_max: cfg.d_max(),
        d_max2: cfg.d_max2(),
        d_max3: cfg.d_max3(),
    }
}

/// Follows a struck ball to its first contact with the net, the table or the
/// floor.
pub fn classify_landing(ball: &BallState, target: Vector2<f64>, cfg: &EnvConfig) -> LandingOutcome {
    let p = ball.params();
    let table = &cfg.table;
    let t_table = time_to_height(&p, BALL_RADIUS);
    let t_net = (p.velocity.x != 0.0)
        .then(|| -p.position.x / p.velocity.x)
        .filter(|&t| t > 0.0);
    if let Some(tn) = t_net {
        if t_table.is_none_or(|tt| tn <= tt) {
            let at = p.position_at(tn);
            let spans_net = at.y.abs() <= table.half_width() + table.net_overhang;
            if spans_net && at.z >= 0.0 && at.z < table.net_height + BALL_RADIUS {
                return outcome(cfg, LandingCase::Net, Vector3::new(0.0, at.y, at.z), p.velocity_at(tn), target);
            }
        }
    }
    if let Some(tt) = t_table {
        let at = p.position_at(tt);
        if table.on_surface(at.x, at.y) {
            let case = if at.x > 0.0 { LandingCase::OwnHalf } else { LandingCase::Returned };
            return outcome(cfg, case, Vector3::new(at.x, at.y, 0.0), p.velocity_at(tt), target);
        }
    }
    let floor = -cfg.table_height + BALL_RADIUS;
    let tf = time_to_height(&p, floor).unwrap_or(0.0);
    let at = p.position_at(tf);
    outcome(cfg, LandingCase::Out, Vector3::new(at.x, at.y, -cfg.table_height), p.velocity_at(tf), target)
}

/// Racket contact followed by the return flight.
pub fn play(hit: &BallState, orientation: &UnitQuaternion<f64>, target: Vector2<f64>, cfg: &EnvConfig) -> LandingOutcome {
    match strike(hit, orientation, cfg) {
        Strike::Return(out) => classify_landing(&out, target, cfg),
        Strike::Whiff => {
            let mut o = outcome(cfg, LandingCase::Out, hit.position, hit.velocity, target);
            o.d3 = o.d_max3;
            o
        }
    }
}

/// A served ball at the hitting plane together with a landing target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub serve: Serve,
    pub target: Vector2<f64>,
}

/// Seeded environment instance.
#[derive(Debug, Clone)]
pub struct RallyEnv {
    pub cfg: EnvConfig,
    rng: ChaCha8Rng,
}

impl RallyEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn reset(&mut self) -> Result<Episode, SimError> {
        let serve = serve(&self.cfg, &mut self.rng)?;
        let target = Vector2::new(self.cfg.target_x.sample(&mut self.rng), self.cfg.target_y.sample(&mut self.rng));
        Ok(Episode { serve, target })
    }

    pub fn step(&self, episode: &Episode, orientation: &UnitQuaternion<f64>) -> LandingOutcome {
        play(&episode.serve.hit, orientation, episode.target, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn facing(n: Vector3<f64>) -> UnitQuaternion<f64> {
        UnitQuaternion::rotation_between(&Vector3::z(), &n).unwrap()
    }

    fn cfg() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn serve_speed_and_determinism() {
        for speed in [3.0, 5.0] {
            let c = cfg().with_speed(speed);
            let a = serve(&c, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            let b = serve(&c, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            assert_eq!(a, b);
            assert!((a.start.velocity.norm() - speed).abs() < 1e-9);
            assert!((a.hit.position.x - c.hitting_plane_x).abs() < 1e-9);
            assert!(a.hit.velocity.x > 0.0);
            assert!(a.observations.len() > 5);
        }
    }

    #[test]
    fn serve_bounce_follows_restitution() {
        let c = cfg();
        let s = serve(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let p0 = BallisticParams {
            t_ref: 0.0,
            position: s.start.position,
            velocity: s.start.velocity,
            stage: FlightStage::PreBounce,
        };
        let vz_pre = p0.velocity_at(s.bounce_time).z;
        assert!(vz_pre < 0.0);
        // post-bounce flight evaluated at the plane, traced back to the bounce
        let vz_post = s.hit.velocity.z + crate::geometry::GRAVITY * (s.t_hit - s.bounce_time);
        assert!((vz_post + c.bounce.restitution_z * vz_pre).abs() < 1e-9);
    }

    #[test]
    fn many_serves_are_playable() {
        for speed in [3.0, 4.0, 5.0] {
            let c = cfg().with_speed(speed);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..200 {
                let s = serve(&c, &mut rng).unwrap();
                assert!(s.hit.position.z >= c.serve.min_hit_height);
                assert!(s.redraws < 100, "{speed} m/s needed {} redraws", s.redraws);
            }
        }
    }

    #[test]
    fn unreachable_serve_errors() {
        let mut c = cfg();
        c.serve_speed = 0.5;
        c.serve.max_attempts = 20;
        assert!(matches!(serve(&c, &mut ChaCha8Rng::seed_from_u64(0)), Err(SimError::NoServe(20))));
    }

    #[test]
    fn head_on_reflection() {
        let mut c = cfg();
        c.racket.swing_speed = 0.0;
        let s = BallState {
            position: Vector3::zeros(),
            velocity: Vector3::new(-5.0, 0.0, 0.0),
        };
        match strike(&s, &facing(Vector3::x()), &c) {
            Strike::Return(o) => assert!((o.velocity - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-12),
            Strike::Whiff => panic!("whiff"),
        }
    }

    #[test]
    fn glancing_frictionless_contact_mirrors() {
        let mut c = cfg();
        c.racket.swing_speed = 0.0;
        c.racket.friction = 0.0;
        let v = Vector3::new(-3.0, 1.0, -2.0);
        let n = Vector3::new(1.0, 0.0, 1.0).normalize();
        // grazing: tiny normal component
        let v = v - n * v.dot(&n) - n * 1e-9;
        match strike(&BallState { position: Vector3::zeros(), velocity: v }, &facing(n), &c) {
            Strike::Return(o) => {
                assert!((o.velocity.norm() - v.norm()).abs() < 1e-8);
                assert!(o.velocity.dot(&n) > 0.0);
            }
            Strike::Whiff => panic!("whiff"),
        }
    }

    #[test]
    fn face_turned_away_whiffs() {
        let s = BallState {
            position: Vector3::new(1.6, 0.0, 0.3),
            velocity: Vector3::new(3.0, 0.0, 0.0),
        };
        assert_eq!(strike(&s, &facing(Vector3::x()), &cfg()), Strike::Whiff);
        let o = play(&s, &facing(Vector3::x()), Vector2::new(-0.7, 0.0), &cfg());
        assert_eq!((o.case, o.d3), (LandingCase::Out, o.d_max3));
    }

    /// Launch state from (x, y, z) such that the centre reaches `(fx, fy)` at
    /// height `fz` after `t` seconds.
    fn ballistic_to(from: Vector3<f64>, to: Vector3<f64>, t: f64) -> BallState {
        let g = crate::geometry::GRAVITY;
        BallState {
            position: from,
            velocity: Vector3::new(
                (to.x - from.x) / t,
                (to.y - from.y) / t,
                (to.z - from.z + 0.5 * g * t * t) / t,
            ),
        }
    }

    #[test]
    fn landing_on_target() {
        let c = cfg();
        let g = Vector2::new(-0.685, 0.0);
        let b = ballistic_to(Vector3::new(1.6, 0.0, 0.3), Vector3::new(g.x, g.y, BALL_RADIUS), 0.5);
        let o = classify_landing(&b, g, &c);
        assert_eq!(o.case, LandingCase::Returned);
        assert!(o.d < 1e-9);
    }

    #[test]
    fn net_ball_records_height() {
        let c = cfg();
        let b = ballistic_to(Vector3::new(1.6, 0.0, 0.3), Vector3::new(0.0, 0.0, c.table.net_height * 0.5), 0.4);
        let o = classify_landing(&b, Vector2::new(-0.7, 0.0), &c);
        assert_eq!(o.case, LandingCase::Net);
        assert!((o.f.z - 0.07625).abs() < 1e-9);
    }

    #[test]
    fn long_ball_is_out() {
        let c = cfg();
        let floor = -c.table_height + BALL_RADIUS;
        let b = ballistic_to(Vector3::new(1.6, 0.0, 0.3), Vector3::new(-1.37 - 0.3, 0.1, floor), 1.5);
        let o = classify_landing(&b, Vector2::new(-0.7, 0.0), &c);
        assert_eq!(o.case, LandingCase::Out);
        assert!((o.d3 - 0.3).abs() < 1e-9);
    }

    #[test]
    fn short_ball_lands_on_own_half() {
        let c = cfg();
        let b = ballistic_to(Vector3::new(1.6, 0.0, 0.3), Vector3::new(0.5, 0.2, BALL_RADIUS), 0.3);
        let o = classify_landing(&b, Vector2::new(-0.7, 0.0), &c);
        assert_eq!(o.case, LandingCase::OwnHalf);
        assert!((o.d2 - 0.5).abs() < 1e-9);
        assert!((o.d_max2 - 1.37).abs() < 1e-12);
    }

    #[test]
    fn normalizers() {
        let c = cfg();
        assert!((c.d_max() - 1.37f64.hypot(1.525)).abs() < 1e-12);
        assert_eq!(c.d_max3(), c.valid_margin);
        assert_eq!(EnvConfig::default().valid_margin, 3.0);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.bounce.restitution_z = 1.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.target_x = Range(1.0, 0.0);
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<EnvConfig>(r#"{"serve_sped": 3}"#).is_err());
        let back: EnvConfig = serde_json::from_str(&serde_json::to_string(&cfg()).unwrap()).unwrap();
        assert_eq!(back, cfg());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = BallState> {
            (0.1f64..0.5, -0.4f64..0.4, 1.0f64..6.0, -1.0f64..1.0, -3.0f64..3.0).prop_map(|(z, y, vx, vy, vz)| {
                BallState {
                    position: Vector3::new(1.6, y, z),
                    velocity: Vector3::new(vx, vy, vz),
                }
            })
        }

        fn orientation() -> impl Strategy<Value = UnitQuaternion<f64>> {
            (-0.6f64..0.6, -0.6f64..0.6, -0.6f64..0.6).prop_map(|(a, b, c)| {
                facing(Vector3::new(-1.0, 0.0, 0.4)) * UnitQuaternion::from_euler_angles(a, b, c)
            })
        }

        proptest! {
            #[test]
            fn table_bounce_never_gains_energy(
                vx in -6.0f64..6.0, vy in -2.0f64..2.0, vz in -6.0f64..-0.01,
                e in 0.01f64..=1.0, f in 0.0f64..=1.0,
            ) {
                let b = BounceModel { restitution_z: e, friction_tangential: f };
                let v = Vector3::new(vx, vy, vz);
                prop_assert!(b.apply(v).norm_squared() <= v.norm_squared() + 1e-12);
            }

            #[test]
            fn every_return_has_one_case(s in state(), q in orientation(), gx in -1.3f64..0.0, gy in -0.7f64..0.7) {
                let o = play(&s, &q, Vector2::new(gx, gy), &cfg());
                prop_assert!(o.d >= 0.0 && o.d2 >= 0.0 && o.d3 >= 0.0 && o.d3 <= o.d_max3);
                prop_assert!(o.d_max > 0.0 && o.d_max2 > 0.0 && o.d_max3 > 0.0);
                match o.case {
                    LandingCase::Returned => prop_assert!(o.f.x <= 0.0 && cfg().table.on_surface(o.f.x, o.f.y)),
                    LandingCase::OwnHalf => prop_assert!(o.f.x > 0.0),
                    LandingCase::Net => prop_assert!(o.f.z < cfg().table.net_height + BALL_RADIUS),
                    LandingCase::Out => {}
                }
            }

            #[test]
            fn mirror_symmetry(s in state(), q in orientation(), gx in -1.3f64..0.0, gy in -0.7f64..0.7) {
                let c = cfg();
                let a = play(&s, &q, Vector2::new(gx, gy), &c);
                // reflecting the face normal across y = 0
                let n = racket_normal(&q, &c.racket);
                let qm = facing(Vector3::new(n.x, -n.y, n.z));
                let b = play(&s.mirrored(), &qm, Vector2::new(gx, -gy), &c);
                prop_assert_eq!(a.case, b.case);
                prop_assert!((a.f.x - b.f.x).abs() < 1e-9 && (a.f.y + b.f.y).abs() < 1e-9);
                prop_assert!((a.d - b.d).abs() < 1e-9);
            }

            #[test]
            fn same_action_same_outcome(seed in 0u64..500) {
                let env = RallyEnv::new(cfg(), seed).unwrap();
                let mut e1 = env.clone();
                let mut e2 = env;
                let (a, b) = (e1.reset().unwrap(), e2.reset().unwrap());
                let q = facing(Vector3::new(-1.0, 0.0, 0.5));
                prop_assert_eq!(e1.step(&a, &q), e2.step(&b, &q));
            }
        }
    }

    #[test]
    fn rotation_helper_points_face() {
        let n = Vector3::new(-1.0, 0.2, 0.5).normalize();
        assert!((racket_normal(&facing(n), &RacketConfig::default()) - n).norm() < 1e-12);
    }
}
