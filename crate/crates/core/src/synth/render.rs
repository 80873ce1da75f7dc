use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{GroundTruthLabel, SceneSpec, Shape, StereoLabel, SynthError};
use crate::events::Event;
use crate::events::Polarity;
use crate::geometry::world::Flight;
use crate::geometry::{CameraModel, StereoRig};

/// An object projected into the image at one instant.
#[derive(Debug, Clone, Copy)]
enum Geom {
    Disk { c: (f64, f64), r: f64 },
    /// Convex quadrilateral, counter-clockwise in pixel coordinates.
    Quad { p: [(f64, f64); 4] },
    Capsule { a: (f64, f64), b: (f64, f64), r: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Projected {
    geom: Geom,
    depth: f64,
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let s = if len2 > 0.0 {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - s * abx).hypot(p.1 - a.1 - s * aby)
}

impl Geom {
    /// Signed distance in pixels, negative inside.
    fn sdf(&self, p: (f64, f64)) -> f64 {
        match *self {
            Geom::Disk { c, r } => (p.0 - c.0).hypot(p.1 - c.1) - r,
            Geom::Capsule { a, b, r } => seg_dist(p, a, b) - r,
            Geom::Quad { p: q } => {
                let mut inside = f64::NEG_INFINITY;
                let mut outside: f64 = 0.0;
                let mut any_out = false;
                for i in 0..4 {
                    let (a, b) = (q[i], q[(i + 1) % 4]);
                    let (ex, ey) = (b.0 - a.0, b.1 - a.1);
                    let len = ex.hypot(ey).max(1e-12);
                    // outward normal of a counter-clockwise polygon
                    let d = ((p.0 - a.0) * ey - (p.1 - a.1) * ex) / len;
                    inside = inside.max(d);
                    if d > 0.0 {
                        any_out = true;
                    }
                    outside = if i == 0 { seg_dist(p, a, b) } else { outside.min(seg_dist(p, a, b)) };
                }
                if any_out {
                    outside
                } else {
                    inside
                }
            }
        }
    }

    /// Shading factor in [0, 1] at an inside point: 1 at the centre line,
    /// 0 at the silhouette. Flat shapes return 0.
    fn profile(&self, p: (f64, f64)) -> f64 {
        match *self {
            Geom::Disk { c, r } => {
                let q = (p.0 - c.0).hypot(p.1 - c.1) / r;
                (1.0 - q * q).max(0.0).sqrt()
            }
            Geom::Capsule { a, b, r } => {
                let q = seg_dist(p, a, b) / r;
                (1.0 - q * q).max(0.0).sqrt()
            }
            Geom::Quad { .. } => 0.0,
        }
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        match *self {
            Geom::Disk { c, r } => (c.0 - r, c.1 - r, c.0 + r, c.1 + r),
            Geom::Capsule { a, b, r } => (a.0.min(b.0) - r, a.1.min(b.1) - r, a.0.max(b.0) + r, a.1.max(b.1) + r),
            Geom::Quad { p } => p.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(x0, y0, x1, y1), q| (x0.min(q.0), y0.min(q.1), x1.max(q.0), y1.max(q.1)),
            ),
        }
    }
}

/// Per-object constants.
#[derive(Debug, Clone, Copy)]
struct Appearance {
    sign: f64,
    shading: f64,
}

/// Output of [`simulate_events`].
#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub events: Vec<Event>,
    pub labels: Vec<GroundTruthLabel>,
    pub warnings: Vec<String>,
}

/// Output of [`simulate_stereo`].
#[derive(Debug, Clone, Default)]
pub struct StereoOutput {
    pub left: Vec<Event>,
    pub right: Vec<Event>,
    pub labels: Vec<StereoLabel>,
    pub warnings: Vec<String>,
}

const BACKGROUND: u8 = u8::MAX;

/// Step-by-step renderer for one camera. Each pixel keeps the log intensity
/// at its last event; whenever the current value moves more than the
/// threshold away from it, one event fires and the reference resets.
pub struct EventSimulator {
    spec: SceneSpec,
    camera: CameraModel,
    flight: Flight,
    looks: Vec<Appearance>,
    dt_us: u64,
    steps: u64,
    step: u64,
    width: usize,
    height: usize,
    l_ref: Vec<f32>,
    l_prev: Vec<f32>,
    top_prev: Vec<u8>,
    stamp: Vec<u64>,
    prev: Vec<Option<Projected>>,
    rng: ChaCha8Rng,
    noise: Option<Poisson<f64>>,
}

impl EventSimulator {
    /// `stream` selects an independent noise sequence for the same seed.
    pub fn new(spec: &SceneSpec, camera: &CameraModel, dt_sim: f64, stream: u64) -> Result<Self, SynthError> {
        spec.validate()?;
        if !(dt_sim > 0.0 && dt_sim <= 0.001 + 1e-12) {
            return Err(SynthError::StepTooLarge(dt_sim));
        }
        if spec.distractors.len() >= BACKGROUND as usize {
            return Err(SynthError::InvalidScene("too many distractors".into()));
        }
        let dt_us = (dt_sim * 1e6).round().max(1.0) as u64;
        let steps = (spec.duration * 1e6 / dt_us as f64).round() as u64;
        let (width, height) = (camera.dims.width as usize, camera.dims.height as usize);
        let mut looks = vec![Appearance {
            sign: spec.ball.shade.sign(),
            shading: spec.shading,
        }];
        for d in &spec.distractors {
            looks.push(Appearance {
                sign: d.shade.sign(),
                shading: match d.shape {
                    Shape::Rect { .. } => 0.0,
                    Shape::Capsule { .. } => spec.shading,
                },
            });
        }
        let lambda = spec.noise_rate * (width * height) as f64 * dt_us as f64 * 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        let mut sim = Self {
            flight: spec.flight(),
            spec: spec.clone(),
            camera: camera.clone(),
            looks,
            dt_us,
            steps,
            step: 0,
            width,
            height,
            l_ref: vec![0.0; width * height],
            l_prev: vec![0.0; width * height],
            top_prev: vec![BACKGROUND; width * height],
            stamp: vec![u64::MAX; width * height],
            prev: Vec::new(),
            rng,
            noise: (lambda > 0.0).then(|| Poisson::new(lambda).unwrap()),
        };
        sim.prev = sim.project_all(0.0);
        let order = Self::depth_order(&sim.prev);
        for b in sim.boxes(&sim.prev) {
            for (x, y) in b {
                let i = y * width + x;
                let (l, top) = sim.shade(&sim.prev, &order, x, y);
                sim.l_ref[i] = l;
                sim.l_prev[i] = l;
                sim.top_prev[i] = top;
            }
        }
        Ok(sim)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    fn project_all(&self, t: f64) -> Vec<Option<Projected>> {
        let cam = &self.camera;
        let proj = |p: Vector3<f64>| cam.project(&p).filter(|q| q.2 > 1e-3);
        let mut out = Vec::with_capacity(1 + self.spec.distractors.len());
        let ball = self.flight.position_at(t);
        out.push(proj(ball).map(|(u, v, z)| Projected {
            geom: Geom::Disk {
                c: (u, v),
                r: cam.focal * self.spec.ball.radius / z,
            },
            depth: z,
        }));
        for d in &self.spec.distractors {
            let (center, rot) = d.pose(t);
            let item = match d.shape {
                Shape::Rect { half_u, half_v } => {
                    let (hu, hv) = (rot * half_u, rot * half_v);
                    let corners = [center - hu - hv, center + hu - hv, center + hu + hv, center - hu + hv];
                    let mut pts = [(0.0, 0.0); 4];
                    let mut depth = 0.0;
                    let mut ok = true;
                    for (k, c) in corners.iter().enumerate() {
                        match proj(*c) {
                            Some((u, v, z)) => {
                                pts[k] = (u, v);
                                depth += z / 4.0;
                            }
                            None => ok = false,
                        }
                    }
                    let area2: f64 = (0..4)
                        .map(|i| {
                            let (a, b) = (pts[i], pts[(i + 1) % 4]);
                            a.0 * b.1 - b.0 * a.1
                        })
                        .sum();
                    if area2 < 0.0 {
                        pts.reverse();
                    }
                    // seen edge-on: nothing to draw
                    (ok && area2.abs() > 1e-6).then_some(Projected {
                        geom: Geom::Quad { p: pts },
                        depth,
                    })
                }
                Shape::Capsule { half_axis, radius } => {
                    let h = rot * half_axis;
                    match (proj(center - h), proj(center + h)) {
                        (Some(a), Some(b)) => {
                            let depth = 0.5 * (a.2 + b.2);
                            Some(Projected {
                                geom: Geom::Capsule {
                                    a: (a.0, a.1),
                                    b: (b.0, b.1),
                                    r: cam.focal * radius / depth,
                                },
                                depth,
                            })
                        }
                        _ => None,
                    }
                }
            };
            out.push(item);
        }
        out
    }

    /// Object indices far to near.
    fn depth_order(objs: &[Option<Projected>]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..objs.len()).filter(|&i| objs[i].is_some()).collect();
        idx.sort_by(|&a, &b| objs[b].unwrap().depth.total_cmp(&objs[a].unwrap().depth));
        idx
    }

    fn shade(&self, objs: &[Option<Projected>], order: &[usize], x: usize, y: usize) -> (f32, u8) {
        let p = (x as f64, y as f64);
        let c = self.spec.contrast_threshold;
        let mut level = 0.0;
        let mut top = BACKGROUND;
        for &k in order {
            let g = objs[k].unwrap().geom;
            if g.sdf(p) <= 0.0 {
                let look = self.looks[k];
                level = look.sign * c * (self.spec.edge_contrast + look.shading * g.profile(p));
                top = k as u8;
            }
        }
        (level as f32, top)
    }

    /// Pixel ranges covering every object, clipped to the sensor.
    fn boxes(&self, objs: &[Option<Projected>]) -> Vec<impl Iterator<Item = (usize, usize)>> {
        let (w, h) = (self.width as f64, self.height as f64);
        objs.iter()
            .flatten()
            .filter_map(|o| {
                let (x0, y0, x1, y1) = o.geom.bbox();
                let x0 = (x0 - 1.0).floor().max(0.0);
                let y0 = (y0 - 1.0).floor().max(0.0);
                let x1 = (x1 + 1.0).ceil().min(w - 1.0);
                let y1 = (y1 + 1.0).ceil().min(h - 1.0);
                (x0 <= x1 && y0 <= y1).then(|| {
                    let (x0, x1) = (x0 as usize, x1 as usize);
                    (y0 as usize..=y1 as usize).flat_map(move |y| (x0..=x1).map(move |x| (x, y)))
                })
            })
            .collect()
    }

    pub fn label_at(&self, t_us: u64) -> GroundTruthLabel {
        let position = self.flight.position_at(t_us as f64 * 1e-6);
        match self.camera.project(&position).filter(|q| q.2 > 1e-3) {
            Some((u, v, z)) => {
                let r = self.camera.focal * self.spec.ball.radius / z;
                GroundTruthLabel {
                    t: t_us,
                    u,
                    v,
                    r,
                    position,
                    visible: self.camera.in_bounds(u - r, v - r) && self.camera.in_bounds(u + r, v + r),
                }
            }
            None => GroundTruthLabel {
                t: t_us,
                u: f64::NAN,
                v: f64::NAN,
                r: f64::NAN,
                position,
                visible: false,
            },
        }
    }

    /// Advances one step; returns the step's events (time-ordered) and the
    /// label at the step's end.
    pub fn next_step(&mut self) -> Option<(Vec<Event>, GroundTruthLabel)> {
        if self.step >= self.steps {
            return None;
        }
        let t0 = self.step * self.dt_us;
        let t1 = t0 + self.dt_us;
        let cur = self.project_all(t1 as f64 * 1e-6);
        let order = Self::depth_order(&cur);
        let c = self.spec.contrast_threshold as f32;
        let mut events = Vec::new();

        let mut dirty = self.boxes(&self.prev);
        dirty.extend(self.boxes(&cur));
        for b in dirty {
            for (x, y) in b {
                let i = y * self.width + x;
                if self.stamp[i] == self.step {
                    continue;
                }
                self.stamp[i] = self.step;
                let (l1, top1) = self.shade(&cur, &order, x, y);
                let l0 = self.l_prev[i];
                let top0 = self.top_prev[i];
                let diff = l1 - self.l_ref[i];
                if diff.abs() > c {
                    let frac = if top0 != top1 {
                        // silhouette crossing: interpolate the signed distance
                        let k = if top1 != BACKGROUND { top1 } else { top0 } as usize;
                        match (self.prev[k], cur[k]) {
                            (Some(a), Some(b)) => {
                                let p = (x as f64, y as f64);
                                let (s0, s1) = (a.geom.sdf(p), b.geom.sdf(p));
                                if s0 != s1 && (s0 <= 0.0) != (s1 <= 0.0) {
                                    s0 / (s0 - s1)
                                } else {
                                    1.0
                                }
                            }
                            _ => 1.0,
                        }
                    } else {
                        let target = self.l_ref[i] + c * diff.signum();
                        ((target - l0) / (l1 - l0)) as f64
                    };
                    let offset = (frac.clamp(0.0, 1.0) * self.dt_us as f64).round() as u64;
                    let p = if diff > 0.0 { Polarity::On } else { Polarity::Off };
                    events.push(Event::new(t0 + offset.min(self.dt_us - 1), x as u16, y as u16, p));
                    self.l_ref[i] = l1;
                }
                self.l_prev[i] = l1;
                self.top_prev[i] = top1;
            }
        }

        if let Some(noise) = &self.noise {
            let n = noise.sample(&mut self.rng) as usize;
            for _ in 0..n {
                let x = self.rng.random_range(0..self.width) as u16;
                let y = self.rng.random_range(0..self.height) as u16;
                let t = t0 + self.rng.random_range(0..self.dt_us);
                let p = if self.rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
                events.push(Event::new(t, x, y, p));
            }
        }
        events.sort_by_key(|e| (e.t, e.y, e.x, e.p.bit()));

        self.prev = cur;
        self.step += 1;
        Some((events, self.label_at(t1)))
    }
}

impl Iterator for EventSimulator {
    type Item = (Vec<Event>, GroundTruthLabel);

    fn next(&mut self) -> Option<Self::Item> {
        self.next_step()
    }
}

/// Renders a whole scene for one camera. Labels are produced at every step
/// (1 kHz for a 1 ms step), starting at t = 0.
pub fn simulate_events(spec: &SceneSpec, camera: &CameraModel, dt_sim: f64) -> Result<SimOutput, SynthError> {
    let mut sim = EventSimulator::new(spec, camera, dt_sim, 0)?;
    let mut out = SimOutput {
        labels: vec![sim.label_at(0)],
        ..Default::default()
    };
    while let Some((events, label)) = sim.next_step() {
        out.events.extend(events);
        out.labels.push(label);
    }
    if !out.labels.iter().any(|l| l.visible) {
        out.warnings.push("ball never fully inside the camera frame; labels marked not visible".into());
    }
    Ok(out)
}

/// Renders both cameras of a rig with independent noise.
pub fn simulate_stereo(spec: &SceneSpec, rig: &StereoRig, dt_sim: f64) -> Result<StereoOutput, SynthError> {
    let (left, right) = std::thread::scope(|s| {
        let l = s.spawn(|| {
            let mut sim = EventSimulator::new(spec, &rig.left, dt_sim, 0)?;
            let mut out = SimOutput {
                labels: vec![sim.label_at(0)],
                ..Default::default()
            };
            while let Some((ev, label)) = sim.next_step() {
                out.events.extend(ev);
                out.labels.push(label);
            }
            Ok::<_, SynthError>(out)
        });
        let r = (|| {
            let mut sim = EventSimulator::new(spec, &rig.right, dt_sim, 1)?;
            let mut out = SimOutput {
                labels: vec![sim.label_at(0)],
                ..Default::default()
            };
            while let Some((ev, label)) = sim.next_step() {
                out.events.extend(ev);
                out.labels.push(label);
            }
            Ok::<_, SynthError>(out)
        })();
        (l.join().expect("render thread panicked"), r)
    });
    let (left, right) = (left?, right?);
    let labels: Vec<StereoLabel> = left
        .labels
        .iter()
        .zip(&right.labels)
        .map(|(l, r)| StereoLabel {
            t: l.t,
            left: (l.u, l.v, l.r),
            right: (r.u, r.v, r.r),
            position: l.position,
            visible: l.visible && r.visible,
        })
        .collect();
    let mut warnings = Vec::new();
    if !labels.iter().any(|l| l.visible) {
        warnings.push("ball never fully inside both camera frames; labels marked not visible".into());
    }
    Ok(StereoOutput {
        left: left.events,
        right: right.events,
        labels,
        warnings,
    })
}
