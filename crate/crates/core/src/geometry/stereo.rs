use serde::{Deserialize, Serialize};

use super::{pixel_to_ray, triangulate, BallObservation3D, CameraModel};
use crate::detect::BallDetection2D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub left: CameraModel,
    pub right: CameraModel,
}

/// Pairs each left detection with the right detection nearest in time,
/// provided they are at most `tolerance_us` apart. Both inputs must be sorted
/// by time; each right detection is used at most once.
pub fn join_detections(
    left: &[BallDetection2D],
    right: &[BallDetection2D],
    tolerance_us: u64,
) -> Vec<(BallDetection2D, BallDetection2D)> {
    let mut out = Vec::new();
    let mut j = 0;
    for l in left {
        while j + 1 < right.len() && right[j + 1].t <= l.t {
            j += 1;
        }
        let best = [j, j + 1]
            .into_iter()
            .filter(|&k| k < right.len())
            .min_by_key(|&k| right[k].t.abs_diff(l.t));
        if let Some(k) = best {
            if right[k].t.abs_diff(l.t) <= tolerance_us {
                out.push((*l, right[k]));
                j = k + 1;
                if j >= right.len() {
                    break;
                }
            }
        }
    }
    out
}

/// Triangulates time-joined detection pairs; degenerate pairs are skipped.
/// Observations carry the left detection's timestamp.
pub fn triangulate_detections(
    rig: &StereoRig,
    left: &[BallDetection2D],
    right: &[BallDetection2D],
    tolerance_us: u64,
) -> Vec<BallObservation3D> {
    join_detections(left, right, tolerance_us)
        .into_iter()
        .filter_map(|(l, r)| {
            let ray_l = pixel_to_ray(&rig.left, l.u, l.v);
            let ray_r = pixel_to_ray(&rig.right, r.u, r.v);
            triangulate(&ray_l, &ray_r, l.t).ok()
        })
        .collect()
}
