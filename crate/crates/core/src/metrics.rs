//! Detection and training scores.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::BallDetection2D;
use crate::synth::GroundTruthLabel;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no visible ground-truth labels; recall is undefined")]
    NoLabels,
    #[error("empty episode log")]
    EmptyLog,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub const DEFAULT_MATCH_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    /// Mean centre distance over true positives, in pixels.
    pub mean_error_px: Option<f64>,
    pub match_radius: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Keeps the labels whose timestamp is a multiple of `period_us`, e.g. the
/// window-end instants a detector reports at.
pub fn labels_at_period(labels: &[GroundTruthLabel], period_us: u64) -> Vec<GroundTruthLabel> {
    labels.iter().filter(|l| l.t % period_us == 0).copied().collect()
}

fn label_period(labels: &[GroundTruthLabel]) -> u64 {
    labels
        .windows(2)
        .map(|w| w[1].t.saturating_sub(w[0].t))
        .filter(|&d| d > 0)
        .min()
        .unwrap_or(u64::MAX)
}

/// Matches every detection to the label nearest in time (within half the
/// label period). A match to a visible label within `match_radius` that has
/// not been claimed yet is a true positive; every other detection is a false
/// positive. Visible labels left unmatched are false negatives.
pub fn score_detections(
    detections: &[BallDetection2D],
    labels: &[GroundTruthLabel],
    match_radius: f64,
) -> Result<DetectionScore, MetricsError> {
    if !labels.iter().any(|l| l.visible) {
        return Err(MetricsError::NoLabels);
    }
    let half = label_period(labels) / 2;
    let mut claimed = vec![false; labels.len()];
    let (mut tp, mut fp, mut err_sum) = (0usize, 0usize, 0.0);
    for d in detections {
        let k = labels.partition_point(|l| l.t < d.t);
        let nearest = [k.wrapping_sub(1), k]
            .into_iter()
            .filter(|&i| i < labels.len())
            .min_by_key(|&i| labels[i].t.abs_diff(d.t))
            .filter(|&i| labels[i].t.abs_diff(d.t) <= half);
        let hit = nearest.and_then(|i| {
            let l = &labels[i];
            let dist = (d.u - l.u).hypot(d.v - l.v);
            (l.visible && !claimed[i] && dist <= match_radius).then_some((i, dist))
        });
        match hit {
            Some((i, dist)) => {
                claimed[i] = true;
                tp += 1;
                err_sum += dist;
            }
            None => fp += 1,
        }
    }
    let visible = labels.iter().filter(|l| l.visible).count();
    let fn_ = visible - tp;
    Ok(DetectionScore {
        precision: if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 },
        recall: tp as f64 / visible as f64,
        mean_error_px: (tp > 0).then(|| err_sum / tp as f64),
        match_radius,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

/// One training episode as logged by the curriculum driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Episode index within its stage.
    pub n: u64,
    /// Serve speed of the stage, m/s.
    pub stage: f64,
    /// Landing case 1..=4; 4 is a successful return.
    pub case: u8,
    pub reward: f64,
    /// Distance from landing point to target, metres.
    pub d: f64,
    pub eta: f64,
}

impl EpisodeRecord {
    pub fn returned(&self) -> bool {
        self.case == 4
    }
}

pub const EPISODE_HEADER: [&str; 6] = ["n", "stage", "case", "reward", "d", "eta"];

pub fn write_episode_csv<W: Write>(out: W, log: &[EpisodeRecord]) -> Result<(), MetricsError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(EPISODE_HEADER)?;
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episode_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>, MetricsError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    /// Index of the first episode of the window within the log.
    pub start: usize,
    pub episodes: usize,
    pub return_rate: f64,
    pub mean_d_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingScore {
    pub return_rate: f64,
    /// Mean landing distance to target over successful returns, mm.
    pub mean_d_mm: Option<f64>,
    pub window: usize,
    pub series: Vec<WindowStat>,
}

fn summarize(start: usize, recs: &[EpisodeRecord]) -> WindowStat {
    let ok: Vec<f64> = recs.iter().filter(|r| r.returned()).map(|r| r.d * 1000.0).collect();
    WindowStat {
        start,
        episodes: recs.len(),
        return_rate: ok.len() as f64 / recs.len() as f64,
        mean_d_mm: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
    }
}

/// Overall and per-window (non-overlapping, last one possibly short) return
/// rate and target distance.
pub fn score_training(log: &[EpisodeRecord], window: usize) -> Result<TrainingScore, MetricsError> {
    if log.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let window = window.max(1);
    let all = summarize(0, log);
    Ok(TrainingScore {
        return_rate: all.return_rate,
        mean_d_mm: all.mean_d_mm,
        window,
        series: log
            .chunks(window)
            .enumerate()
            .map(|(i, c)| summarize(i * window, c))
            .collect(),
    })
}

/// Return rate over a sliding window ending at each episode (shorter at the
/// start of the log).
pub fn sliding_return_rate(log: &[EpisodeRecord], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut hits = 0usize;
    (0..log.len())
        .map(|i| {
            hits += log[i].returned() as usize;
            if i >= window {
                hits -= log[i - window].returned() as usize;
            }
            hits as f64 / (i + 1).min(window) as f64
        })
        .collect()
}

pub fn write_series_csv<W: Write>(out: W, score: &TrainingScore) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start", "episodes", "return_rate", "mean_d_mm"])?;
    for s in &score.series {
        w.write_record([
            s.start.to_string(),
            s.episodes.to_string(),
            s.return_rate.to_string(),
            s.mean_d_mm.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn label(t: u64, u: f64, visible: bool) -> GroundTruthLabel {
        GroundTruthLabel {
            t,
            u,
            v: 100.0,
            r: 8.0,
            position: Vector3::zeros(),
            visible,
        }
    }

    fn det(t: u64, u: f64, v: f64) -> BallDetection2D {
        BallDetection2D {
            t,
            u,
            v,
            r: 8.0,
            circularity: 0.9,
            solidity: 0.9,
        }
    }

    fn ep(case: u8, d: f64) -> EpisodeRecord {
        EpisodeRecord {
            n: 0,
            stage: 3.0,
            case,
            reward: 0.0,
            d,
            eta: 0.1,
        }
    }

    #[test]
    fn perfect_detections() {
        let labels: Vec<_> = (1..=10).map(|k| label(k * 2000, 10.0 * k as f64, true)).collect();
        let dets: Vec<_> = labels.iter().map(|l| det(l.t, l.u, l.v)).collect();
        let s = score_detections(&dets, &labels, 5.0).unwrap();
        assert_eq!((s.precision, s.recall, s.mean_error_px), (1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn far_detection_is_false_positive() {
        let s = score_detections(&[det(2000, 110.0, 100.0)], &[label(2000, 10.0, true)], 10.0).unwrap();
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
        assert_eq!((s.false_positives, s.false_negatives), (1, 1));
    }

    #[test]
    fn nine_of_ten() {
        let labels: Vec<_> = (1..=10).map(|k| label(k * 2000, 10.0 * k as f64, true)).collect();
        let dets: Vec<_> = labels[..9].iter().map(|l| det(l.t, l.u + 1.5, l.v + 2.0)).collect();
        let s = score_detections(&dets, &labels, 5.0).unwrap();
        assert_eq!(s.precision, 1.0);
        assert!((s.recall - 0.9).abs() < 1e-12);
        assert!((s.mean_error_px.unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn detection_on_invisible_label_is_false_positive() {
        let labels = [label(2000, 10.0, true), label(4000, 20.0, false)];
        let s = score_detections(&[det(4000, 20.0, 100.0)], &labels, 5.0).unwrap();
        assert_eq!((s.true_positives, s.false_positives, s.false_negatives), (0, 1, 1));
    }

    #[test]
    fn duplicate_detection_counts_once() {
        let labels = [label(2000, 10.0, true), label(4000, 20.0, true)];
        let s = score_detections(&[det(2000, 10.0, 100.0), det(2100, 10.0, 100.0)], &labels, 5.0).unwrap();
        assert_eq!((s.true_positives, s.false_positives), (1, 1));
    }

    #[test]
    fn detection_far_in_time_is_unmatched() {
        let labels = [label(2000, 10.0, true), label(4000, 20.0, true)];
        let s = score_detections(&[det(9000, 20.0, 100.0)], &labels, 5.0).unwrap();
        assert_eq!(s.false_positives, 1);
    }

    #[test]
    fn empty_labels_error() {
        assert!(matches!(score_detections(&[], &[], 5.0), Err(MetricsError::NoLabels)));
        assert!(score_detections(&[], &[label(0, 0.0, false)], 5.0).is_err());
    }

    #[test]
    fn subsample_to_window_ends() {
        let labels: Vec<_> = (0..10).map(|k| label(k * 1000, 0.0, true)).collect();
        let t: Vec<u64> = labels_at_period(&labels, 2000).iter().map(|l| l.t).collect();
        assert_eq!(t, vec![0, 2000, 4000, 6000, 8000]);
    }

    #[test]
    fn training_rates() {
        assert_eq!(score_training(&[ep(4, 0.1); 7], 50).unwrap().return_rate, 1.0);
        let alt: Vec<_> = (0..10).map(|i| if i % 2 == 0 { ep(1, 0.0) } else { ep(4, 0.2) }).collect();
        let s = score_training(&alt, 4).unwrap();
        assert_eq!(s.return_rate, 0.5);
        assert_eq!(s.series.len(), 3);
        assert_eq!(s.series[2].episodes, 2);
        let d = score_training(&[ep(4, 0.1), ep(3, 5.0), ep(4, 0.3)], 50).unwrap();
        assert!((d.mean_d_mm.unwrap() - 200.0).abs() < 1e-9);
        assert!(score_training(&[], 50).is_err());
    }

    #[test]
    fn sliding_rate() {
        let log = [ep(4, 0.0), ep(1, 0.0), ep(4, 0.0), ep(4, 0.0)];
        assert_eq!(sliding_return_rate(&log, 2), vec![1.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn episode_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let log = vec![ep(4, 0.125), ep(2, 0.0)];
        write_episode_csv(std::fs::File::create(&path).unwrap(), &log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("n,stage,case,reward,d,eta\n"));
        assert_eq!(read_episode_csv(&path).unwrap(), log);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn infinite_radius_gives_full_recall(n in 1usize..40, jitter in 0.0f64..500.0) {
                let labels: Vec<_> = (1..=n as u64).map(|k| label(k * 2000, 5.0 * k as f64, true)).collect();
                let dets: Vec<_> = labels.iter().map(|l| det(l.t, l.u + jitter, l.v - jitter)).collect();
                let s = score_detections(&dets, &labels, f64::INFINITY).unwrap();
                prop_assert_eq!(s.recall, 1.0);
            }

            #[test]
            fn false_positive_order_irrelevant(seed in 0u64..1000) {
                use rand::{seq::SliceRandom, SeedableRng};
                let labels: Vec<_> = (1..=20u64).map(|k| label(k * 2000, 5.0 * k as f64, true)).collect();
                let mut dets: Vec<_> = labels.iter().map(|l| det(l.t, l.u, l.v)).collect();
                dets.extend((1..=20u64).map(|k| det(k * 2000 + 10, 900.0, 600.0)));
                dets.sort_by_key(|d| d.t);
                let base = score_detections(&dets, &labels, 5.0).unwrap();
                let (mut good, mut bad): (Vec<BallDetection2D>, Vec<BallDetection2D>) = dets.into_iter().partition(|d| d.u < 800.0);
                bad.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                good.extend(bad);
                good.sort_by_key(|d| d.t);
                prop_assert_eq!(score_detections(&good, &labels, 5.0).unwrap(), base);
            }
        }
    }
}
