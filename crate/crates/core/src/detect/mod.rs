//! Ball detection on windows of events: denoise, cluster, filter by polarity
//! and shape, then localize with a minimum enclosing circle. A tracker keeps
//! a region of interest around the last detection.

mod circle;
mod dbscan;
mod morphology;
mod shape;

pub use circle::{min_enclosing_circle, Circle};
pub use dbscan::{dbscan, groups, Labels};
pub use morphology::{denoise, elliptical_element};
pub use shape::{convex_hull, polygon_area, polygon_perimeter, shape_features, ShapeFeatures};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{clip_to_roi, Event, EventBatch, Roi, SensorDims};

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// Integration window, microseconds.
    pub window_us: u64,
    pub kernel_radius: u32,
    pub eps: f64,
    pub min_samples: usize,
    pub cluster_min: usize,
    pub cluster_max: usize,
    /// Positive events farther than this from their centroid are dropped.
    pub centroid_dist_max: f64,
    pub circularity_min: f64,
    pub solidity_min: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Half-size of the region of interest kept around the last detection.
    pub roi_expand: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            window_us: 2000,
            kernel_radius: 1,
            eps: 3.0,
            min_samples: 5,
            cluster_min: 20,
            cluster_max: 4000,
            centroid_dist_max: 60.0,
            circularity_min: 0.6,
            solidity_min: 0.5,
            radius_min: 3.0,
            radius_max: 40.0,
            roi_expand: 80.0,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::InvalidConfig(m.into()));
        if self.window_us == 0 {
            return bad("window_us must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if self.min_samples == 0 {
            return bad("min_samples must be at least 1");
        }
        if self.cluster_min > self.cluster_max {
            return bad("cluster_min exceeds cluster_max");
        }
        if !(self.radius_min >= 0.0 && self.radius_min <= self.radius_max) {
            return bad("radius bounds out of order");
        }
        if !(self.circularity_min >= 0.0 && self.circularity_min <= 1.0) {
            return bad("circularity_min must lie in [0, 1]");
        }
        if !(self.solidity_min >= 0.0 && self.solidity_min <= 1.0) {
            return bad("solidity_min must lie in [0, 1]");
        }
        if !(self.centroid_dist_max > 0.0 && self.roi_expand > 0.0) {
            return bad("distances must be positive");
        }
        Ok(())
    }
}

/// A localized ball: centre and radius in pixels, `t` the end of the window
/// it was found in (microseconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallDetection2D {
    pub t: u64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub circularity: f64,
    pub solidity: f64,
}

/// Why a cluster was not accepted as the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rejection {
    /// Nothing left after the polarity filter.
    NoPositiveEvents,
    /// Fewer than three distinct pixels.
    Degenerate,
    LowCircularity(f64),
    LowSolidity(f64),
    RadiusOutOfRange(f64),
}

/// Events of one cluster that survived the polarity filter, with features.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub events: Vec<Event>,
    pub features: ShapeFeatures,
}

/// Keeps positive events only, then drops those farther than `max_dist`
/// from the centroid of the positives. A single pass: the centroid is not
/// recomputed after dropping.
pub fn polarity_filter(cluster: &[Event], max_dist: f64) -> Vec<Event> {
    let on: Vec<Event> = cluster.iter().filter(|e| e.is_on()).copied().collect();
    if on.is_empty() {
        return on;
    }
    let n = on.len() as f64;
    let cx = on.iter().map(|e| e.x as f64).sum::<f64>() / n;
    let cy = on.iter().map(|e| e.y as f64).sum::<f64>() / n;
    on.into_iter()
        .filter(|e| (e.x as f64 - cx).hypot(e.y as f64 - cy) <= max_dist)
        .collect()
}

/// Shape check on a polarity-filtered cluster.
pub fn verify_shape(events: Vec<Event>, cfg: &DetectConfig) -> Result<Candidate, Rejection> {
    if events.is_empty() {
        return Err(Rejection::NoPositiveEvents);
    }
    let pixels: Vec<(u16, u16)> = events.iter().map(|e| (e.x, e.y)).collect();
    let features = shape_features(&pixels).ok_or(Rejection::Degenerate)?;
    if features.circularity < cfg.circularity_min {
        return Err(Rejection::LowCircularity(features.circularity));
    }
    if features.solidity < cfg.solidity_min {
        return Err(Rejection::LowSolidity(features.solidity));
    }
    Ok(Candidate { events, features })
}

/// Minimum enclosing circle of the candidate's distinct pixel centres.
pub fn localize(candidate: &Candidate, t: u64, cfg: &DetectConfig) -> Result<BallDetection2D, Rejection> {
    let mut pixels: Vec<(u16, u16)> = candidate.events.iter().map(|e| (e.x, e.y)).collect();
    pixels.sort_unstable();
    pixels.dedup();
    let pts: Vec<(f64, f64)> = pixels.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let c = min_enclosing_circle(&pts).ok_or(Rejection::Degenerate)?;
    if c.r < cfg.radius_min || c.r > cfg.radius_max {
        return Err(Rejection::RadiusOutOfRange(c.r));
    }
    Ok(BallDetection2D {
        t,
        u: c.cx,
        v: c.cy,
        r: c.r,
        circularity: candidate.features.circularity,
        solidity: candidate.features.solidity,
    })
}

/// Wall-clock time spent in each stage, accumulated across calls.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub clip: Duration,
    pub denoise: Duration,
    pub cluster: Duration,
    pub polarity: Duration,
    pub verify: Duration,
    pub localize: Duration,
    pub windows: u64,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.clip + self.denoise + self.cluster + self.polarity + self.verify + self.localize
    }

    pub fn stages(&self) -> [(&'static str, Duration); 6] {
        [
            ("clip", self.clip),
            ("denoise", self.denoise),
            ("cluster", self.cluster),
            ("polarity", self.polarity),
            ("verify", self.verify),
            ("localize", self.localize),
        ]
    }
}

/// Everything the pipeline produced for one window.
#[derive(Debug, Clone, Default)]
pub struct WindowReport {
    pub detection: Option<BallDetection2D>,
    pub clusters: usize,
    pub rejections: Vec<Rejection>,
}

fn lap(slot: &mut Duration, since: &mut Instant) {
    let now = Instant::now();
    *slot += now - *since;
    *since = now;
}

/// Runs the detection chain on one window (already clipped to the ROI). Among
/// several accepted candidates the most circular wins, ties going to the
/// larger cluster.
pub fn detect_window(batch: &EventBatch, cfg: &DetectConfig, timings: Option<&mut StageTimings>) -> WindowReport {
    let mut scratch = StageTimings::default();
    let tm = timings.unwrap_or(&mut scratch);
    let mut clock = Instant::now();

    let clean = denoise(batch, cfg.kernel_radius);
    lap(&mut tm.denoise, &mut clock);

    let pts: Vec<(f64, f64)> = clean.events.iter().map(|e| (e.x as f64, e.y as f64)).collect();
    let labels = dbscan(&pts, cfg.eps, cfg.min_samples);
    let clusters = groups(&labels, cfg.cluster_min, cfg.cluster_max);
    lap(&mut tm.cluster, &mut clock);

    let filtered: Vec<Vec<Event>> = clusters
        .iter()
        .map(|idx| {
            let evs: Vec<Event> = idx.iter().map(|&i| clean.events[i]).collect();
            polarity_filter(&evs, cfg.centroid_dist_max)
        })
        .collect();
    lap(&mut tm.polarity, &mut clock);

    let mut rejections = Vec::new();
    let mut candidates = Vec::new();
    for evs in filtered {
        match verify_shape(evs, cfg) {
            Ok(c) => candidates.push(c),
            Err(r) => rejections.push(r),
        }
    }
    lap(&mut tm.verify, &mut clock);

    let mut best: Option<(BallDetection2D, usize)> = None;
    for c in &candidates {
        match localize(c, batch.t_end, cfg) {
            Ok(d) => {
                let better = best.is_none_or(|(b, n)| {
                    d.circularity > b.circularity || d.circularity == b.circularity && c.events.len() > n
                });
                if better {
                    best = Some((d, c.events.len()));
                }
            }
            Err(r) => rejections.push(r),
        }
    }
    lap(&mut tm.localize, &mut clock);
    tm.windows += 1;

    WindowReport {
        detection: best.map(|(d, _)| d),
        clusters: clusters.len(),
        rejections,
    }
}

/// ROI tracking state across windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    pub roi: Roi,
    pub dims: SensorDims,
    pub cfg: DetectConfig,
}

impl Tracker {
    pub fn new(dims: SensorDims, cfg: DetectConfig) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self {
            roi: Roi::full(dims),
            dims,
            cfg,
        })
    }

    /// Processes one window. A detection recentres the ROI on the ball; three
    /// consecutive misses reset it to the full sensor.
    pub fn step(&mut self, batch: &EventBatch) -> Option<BallDetection2D> {
        self.step_report(batch, None).detection
    }

    pub fn step_report(&mut self, batch: &EventBatch, mut timings: Option<&mut StageTimings>) -> WindowReport {
        let clock = Instant::now();
        let clipped = clip_to_roi(batch, &self.roi);
        if let Some(t) = timings.as_deref_mut() {
            t.clip += clock.elapsed();
        }
        let report = detect_window(&clipped, &self.cfg, timings);
        match report.detection {
            Some(d) => self.roi = Roi::around(d.u, d.v, self.cfg.roi_expand, self.dims),
            None => {
                self.roi.miss_count += 1;
                if self.roi.miss_count >= Roi::MAX_MISSES {
                    self.roi = Roi::full(self.dims);
                }
            }
        }
        report
    }

    /// Runs the tracker over consecutive windows of a stream.
    pub fn run(&mut self, batches: impl IntoIterator<Item = EventBatch>) -> Vec<BallDetection2D> {
        batches.into_iter().filter_map(|b| self.step(&b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Polarity;

    fn ev(x: u16, y: u16, p: Polarity) -> Event {
        Event::new(0, x, y, p)
    }

    #[test]
    fn polarity_filter_single_pass() {
        let cluster = [
            ev(0, 0, Polarity::On),
            ev(1, 0, Polarity::On),
            ev(40, 0, Polarity::On),
            ev(5, 5, Polarity::Off),
        ];
        // centroid (13.67, 0): every positive is farther than 10
        assert!(polarity_filter(&cluster, 10.0).is_empty());
        assert_eq!(polarity_filter(&cluster, 14.0).len(), 2);
        assert!(polarity_filter(&[ev(1, 1, Polarity::Off)], 10.0).is_empty());
    }

    fn disk_batch(cx: f64, cy: f64, r: f64, dims: SensorDims) -> EventBatch {
        let mut events = Vec::new();
        for y in 0..dims.height as u16 {
            for x in 0..dims.width as u16 {
                if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                    events.push(Event::new(1000, x, y, Polarity::On));
                }
            }
        }
        EventBatch::new(events, 0, 2000, dims).unwrap()
    }

    #[test]
    fn detects_a_filled_disk() {
        let dims = SensorDims::new(200, 150);
        let b = disk_batch(90.0, 70.0, 12.0, dims);
        let report = detect_window(&b, &DetectConfig::default(), None);
        let d = report.detection.unwrap();
        assert!((d.u - 90.0).abs() < 0.5 && (d.v - 70.0).abs() < 0.5);
        assert!((d.r - 12.0).abs() < 1.0);
        assert_eq!(d.t, 2000);
    }

    #[test]
    fn negative_blob_rejected() {
        let dims = SensorDims::new(200, 150);
        let mut b = disk_batch(90.0, 70.0, 12.0, dims);
        for e in &mut b.events {
            e.p = Polarity::Off;
        }
        let report = detect_window(&b, &DetectConfig::default(), None);
        assert!(report.detection.is_none());
        assert_eq!(report.rejections, vec![Rejection::NoPositiveEvents]);
    }

    #[test]
    fn tracker_roi_lifecycle() {
        let dims = SensorDims::new(400, 300);
        let mut tr = Tracker::new(dims, DetectConfig::default()).unwrap();
        assert!(tr.step(&disk_batch(200.0, 150.0, 10.0, dims)).is_some());
        assert!(!tr.roi.is_full(dims));
        assert!(tr.roi.contains(200, 150) && !tr.roi.contains(10, 10));
        let empty = EventBatch::new(Vec::new(), 2000, 4000, dims).unwrap();
        for misses in 1..=2 {
            assert!(tr.step(&empty).is_none());
            assert_eq!(tr.roi.miss_count, misses);
            assert!(!tr.roi.is_full(dims));
        }
        assert!(tr.step(&empty).is_none());
        assert!(tr.roi.is_full(dims));
        assert_eq!(tr.roi.miss_count, 0);
    }

    #[test]
    fn tracker_ignores_ball_outside_roi() {
        let dims = SensorDims::new(400, 300);
        let mut tr = Tracker::new(dims, DetectConfig::default()).unwrap();
        tr.step(&disk_batch(60.0, 60.0, 10.0, dims)).unwrap();
        assert!(tr.step(&disk_batch(340.0, 240.0, 10.0, dims)).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(DetectConfig::default().validate().is_ok());
        let cfg = DetectConfig {
            cluster_min: 10,
            cluster_max: 5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DetectConfig {
            eps: 0.0,
            ..Default::default()
        };
        assert!(Tracker::new(SensorDims::new(10, 10), cfg).is_err());
    }
}
