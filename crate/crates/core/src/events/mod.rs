//! Event, window and region-of-interest types shared by every stage of the
//! pipeline, plus the CSV / binary event file formats.

mod io;

pub use io::{
    read_event_binary, read_event_csv, read_event_file, read_event_stream, write_event_binary,
    write_event_csv, EventReader, BINARY_MAGIC,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while reading, writing or validating event data.
#[derive(Debug, Error)]
pub enum EventError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: timestamp {t} precedes previous timestamp {prev}")]
    Ordering { line: u64, t: u64, prev: u64 },
    #[error("line {line}: event ({x}, {y}) outside sensor {width}x{height}")]
    OutOfBounds {
        line: u64,
        x: u64,
        y: u64,
        width: u32,
        height: u32,
    },
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("bad binary event file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Sign of the log-intensity change that fired an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// Brightness decrease (`p = 0`).
    Off,
    /// Brightness increase (`p = 1`).
    On,
}

impl Polarity {
    pub fn from_bit(p: u8) -> Option<Self> {
        match p {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }
}

/// One asynchronous DVS event. `t` is in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }

    pub fn is_on(&self) -> bool {
        self.p == Polarity::On
    }
}

/// Sensor resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorDims {
    pub width: u32,
    pub height: u32,
}

impl SensorDims {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, x: u64, y: u64) -> bool {
        x < self.width as u64 && y < self.height as u64
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A time-ordered slice of events covering `[t_start, t_end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    pub events: Vec<Event>,
    pub t_start: u64,
    pub t_end: u64,
    pub dims: SensorDims,
}

impl EventBatch {
    pub fn new(
        events: Vec<Event>,
        t_start: u64,
        t_end: u64,
        dims: SensorDims,
    ) -> Result<Self, EventError> {
        if t_end <= t_start {
            return Err(EventError::InvalidBatch(format!(
                "t_end {t_end} must exceed t_start {t_start}"
            )));
        }
        let mut prev = t_start;
        for e in &events {
            if e.t < prev || e.t >= t_end {
                return Err(EventError::InvalidBatch(format!(
                    "event at t={} out of order or outside [{t_start}, {t_end})",
                    e.t
                )));
            }
            if !dims.contains(e.x as u64, e.y as u64) {
                return Err(EventError::InvalidBatch(format!(
                    "event ({}, {}) outside sensor",
                    e.x, e.y
                )));
            }
            prev = e.t;
        }
        Ok(Self {
            events,
            t_start,
            t_end,
            dims,
        })
    }

    /// Same window, different (sub)set of events.
    pub fn with_events(&self, events: Vec<Event>) -> Self {
        Self {
            events,
            t_start: self.t_start,
            t_end: self.t_end,
            dims: self.dims,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Inclusive pixel rectangle restricting detection, with the consecutive-miss
/// counter used to fall back to the full sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x_min: u16,
    pub x_max: u16,
    pub y_min: u16,
    pub y_max: u16,
    pub miss_count: u8,
}

impl Roi {
    /// Consecutive misses after which the ROI falls back to the full sensor.
    pub const MAX_MISSES: u8 = 3;

    pub fn full(dims: SensorDims) -> Self {
        Self {
            x_min: 0,
            x_max: (dims.width - 1) as u16,
            y_min: 0,
            y_max: (dims.height - 1) as u16,
            miss_count: 0,
        }
    }

    /// `[u - expand, u + expand] x [v - expand, v + expand]` clipped to the sensor.
    pub fn around(u: f64, v: f64, expand: f64, dims: SensorDims) -> Self {
        let clip = |lo: f64, hi: f64, max: u32| -> (u16, u16) {
            let max = (max - 1) as f64;
            let mut a = lo.floor().clamp(0.0, max);
            let mut b = hi.ceil().clamp(0.0, max);
            if a >= b {
                // keep the rectangle non-degenerate at the sensor border
                if b < max {
                    b += 1.0;
                } else {
                    a -= 1.0;
                }
            }
            (a as u16, b as u16)
        };
        let (x_min, x_max) = clip(u - expand, u + expand, dims.width);
        let (y_min, y_max) = clip(v - expand, v + expand, dims.height);
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
            miss_count: 0,
        }
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn is_full(&self, dims: SensorDims) -> bool {
        let full = Roi::full(dims);
        self.x_min == full.x_min
            && self.x_max == full.x_max
            && self.y_min == full.y_min
            && self.y_max == full.y_max
    }
}

/// Keeps exactly the events inside the (inclusive) ROI, preserving order.
pub fn clip_to_roi(batch: &EventBatch, roi: &Roi) -> EventBatch {
    let events = batch
        .events
        .iter()
        .copied()
        .filter(|e| roi.contains(e.x, e.y))
        .collect();
    batch.with_events(events)
}

/// Lazily partitions a time-ordered event stream into half-open windows
/// `[k*dt, (k+1)*dt)`. Gaps inside the stream produce empty batches; nothing
/// is emitted before the first or after the last event.
pub struct Windows<I> {
    inner: I,
    dt: u64,
    dims: SensorDims,
    pending: Option<Event>,
    next_start: Option<u64>,
}

impl<I: Iterator<Item = Event>> Iterator for Windows<I> {
    type Item = EventBatch;

    fn next(&mut self) -> Option<EventBatch> {
        let first = match self.pending.take() {
            Some(e) => e,
            None => self.inner.next()?,
        };
        let start = match self.next_start {
            Some(s) => s,
            None => first.t / self.dt * self.dt,
        };
        let end = start + self.dt;
        self.next_start = Some(end);
        if first.t >= end {
            self.pending = Some(first);
            return Some(EventBatch {
                events: Vec::new(),
                t_start: start,
                t_end: end,
                dims: self.dims,
            });
        }
        let mut events = vec![first];
        for e in self.inner.by_ref() {
            if e.t >= end {
                self.pending = Some(e);
                break;
            }
            events.push(e);
        }
        Some(EventBatch {
            events,
            t_start: start,
            t_end: end,
            dims: self.dims,
        })
    }
}

/// Iterator form of [`window_events`].
///
/// # Panics
/// If `dt_window` is zero.
pub fn windows<I>(stream: I, dt_window: u64, dims: SensorDims) -> Windows<I::IntoIter>
where
    I: IntoIterator<Item = Event>,
{
    assert!(dt_window > 0, "window length must be positive");
    Windows {
        inner: stream.into_iter(),
        dt: dt_window,
        dims,
        pending: None,
        next_start: None,
    }
}

pub fn window_events<I>(stream: I, dt_window: u64, dims: SensorDims) -> Vec<EventBatch>
where
    I: IntoIterator<Item = Event>,
{
    windows(stream, dt_window, dims).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64, x: u16, y: u16) -> Event {
        Event::new(t, x, y, Polarity::On)
    }

    const DIMS: SensorDims = SensorDims {
        width: 100,
        height: 100,
    };

    #[test]
    fn windows_partition_with_gaps() {
        let out = window_events(vec![ev(100, 0, 0), ev(900, 0, 0), ev(1100, 0, 0)], 1000, DIMS);
        assert_eq!(out.len(), 2);
        assert_eq!(
            out[0].events.iter().map(|e| e.t).collect::<Vec<_>>(),
            vec![100, 900]
        );
        assert_eq!(out[1].events[0].t, 1100);
        assert_eq!((out[1].t_start, out[1].t_end), (1000, 2000));

        let out = window_events(vec![ev(500, 0, 0), ev(3500, 0, 0)], 1000, DIMS);
        assert_eq!(out.len(), 4);
        assert!(out[1].is_empty() && out[2].is_empty());
    }

    #[test]
    fn windows_empty_stream() {
        assert!(window_events(Vec::new(), 1000, DIMS).is_empty());
    }

    #[test]
    fn windows_half_open_boundary() {
        let out = window_events(vec![ev(999, 0, 0), ev(1000, 0, 0)], 1000, DIMS);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].events[0].t, 999);
        assert_eq!(out[1].events[0].t, 1000);
    }

    #[test]
    fn clip_full_roi_is_identity() {
        let b = EventBatch::new(vec![ev(1, 0, 0), ev(2, 99, 99), ev(3, 50, 7)], 0, 10, DIMS).unwrap();
        assert_eq!(clip_to_roi(&b, &Roi::full(DIMS)), b);
    }

    #[test]
    fn clip_bounds_inclusive() {
        let roi = Roi {
            x_min: 10,
            x_max: 20,
            y_min: 10,
            y_max: 20,
            miss_count: 0,
        };
        let b = EventBatch::new(vec![ev(1, 5, 15), ev(2, 10, 10), ev(3, 20, 20), ev(4, 21, 20)], 0, 10, DIMS)
            .unwrap();
        let c = clip_to_roi(&b, &roi);
        assert_eq!(c.events, vec![ev(2, 10, 10), ev(3, 20, 20)]);
    }

    #[test]
    fn batch_rejects_bad_window() {
        assert!(EventBatch::new(vec![], 10, 10, DIMS).is_err());
        assert!(EventBatch::new(vec![ev(10, 0, 0)], 0, 10, DIMS).is_err());
        assert!(EventBatch::new(vec![ev(5, 0, 0), ev(4, 0, 0)], 0, 10, DIMS).is_err());
    }

    #[test]
    fn roi_around_clips_to_sensor() {
        let r = Roi::around(5.0, 95.0, 20.0, DIMS);
        assert_eq!((r.x_min, r.x_max, r.y_min, r.y_max), (0, 25, 75, 99));
        let r = Roi::around(50.0, 50.0, 10.0, DIMS);
        assert_eq!((r.x_min, r.x_max, r.y_min, r.y_max), (40, 60, 40, 60));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stream() -> impl Strategy<Value = Vec<Event>> {
            prop::collection::vec((0u64..5_000, 0u16..100, 0u16..100, any::<bool>()), 0..200).prop_map(
                |mut v| {
                    v.sort_by_key(|e| e.0);
                    v.into_iter()
                        .map(|(t, x, y, p)| Event::new(t, x, y, if p { Polarity::On } else { Polarity::Off }))
                        .collect()
                },
            )
        }

        proptest! {
            #[test]
            fn windows_concatenate_to_input(s in stream(), dt in 1u64..2_000) {
                let out = window_events(s.clone(), dt, DIMS);
                let joined: Vec<Event> = out.iter().flat_map(|b| b.events.iter().copied()).collect();
                prop_assert_eq!(joined, s);
                for w in out.windows(2) {
                    prop_assert_eq!(w[0].t_end, w[1].t_start);
                }
                for b in &out {
                    prop_assert!(b.events.iter().all(|e| e.t >= b.t_start && e.t < b.t_end));
                }
            }

            #[test]
            fn clip_is_idempotent(s in stream(), a in 0u16..99, b in 0u16..99, c in 0u16..99, d in 0u16..99) {
                let roi = Roi { x_min: a.min(b), x_max: a.max(b) + 1, y_min: c.min(d), y_max: c.max(d) + 1, miss_count: 0 };
                let batch = EventBatch::new(s, 0, 5_000, DIMS).unwrap();
                let once = clip_to_roi(&batch, &roi);
                prop_assert_eq!(clip_to_roi(&once, &roi), once);
            }
        }
    }
}
