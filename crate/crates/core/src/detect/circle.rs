use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

const SLACK: f64 = 1e-9;

impl Circle {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        (p.0 - self.cx).hypot(p.1 - self.cy) <= self.r + SLACK * (1.0 + self.r)
    }

    fn from_two(a: (f64, f64), b: (f64, f64)) -> Self {
        let cx = (a.0 + b.0) / 2.0;
        let cy = (a.1 + b.1) / 2.0;
        let r = (a.0 - cx).hypot(a.1 - cy).max((b.0 - cx).hypot(b.1 - cy));
        Self { cx, cy, r }
    }

    /// Circumcircle; falls back to the widest pair when the points are
    /// collinear.
    fn from_three(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Self {
        let (bx, by) = (b.0 - a.0, b.1 - a.1);
        let (cx, cy) = (c.0 - a.0, c.1 - a.1);
        let d = 2.0 * (bx * cy - by * cx);
        if d.abs() < 1e-12 {
            return [Self::from_two(a, b), Self::from_two(a, c), Self::from_two(b, c)]
                .into_iter()
                .fold(Self::from_two(a, a), |m, x| if x.r > m.r { x } else { m });
        }
        let ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d;
        let uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d;
        let (ox, oy) = (a.0 + ux, a.1 + uy);
        let r = [a, b, c]
            .iter()
            .map(|p| (p.0 - ox).hypot(p.1 - oy))
            .fold(0.0, f64::max);
        Self { cx: ox, cy: oy, r }
    }
}

/// Exact minimum enclosing circle by randomized incremental construction
/// (expected linear time). The shuffle uses a fixed seed so the result is
/// reproducible.
pub fn min_enclosing_circle(points: &[(f64, f64)]) -> Option<Circle> {
    let mut pts = points.to_vec();
    match pts.len() {
        0 => return None,
        1 => {
            return Some(Circle {
                cx: pts[0].0,
                cy: pts[0].1,
                r: 0.0,
            })
        }
        _ => {}
    }
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut c = Circle::from_two(pts[0], pts[1]);
    for i in 2..pts.len() {
        if c.contains(pts[i]) {
            continue;
        }
        c = Circle::from_two(pts[0], pts[i]);
        for j in 1..i {
            if c.contains(pts[j]) {
                continue;
            }
            c = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains(pts[k]) {
                    c = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Some(c)
}

/// Brute force over every pair and triple: the smallest candidate circle
/// that contains all points. Quartic; only for checking.
#[cfg(test)]
fn min_enclosing_circle_brute(points: &[(f64, f64)]) -> Option<Circle> {
    let n = points.len();
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(Circle {
            cx: points[0].0,
            cy: points[0].1,
            r: 0.0,
        });
    }
    let mut best: Option<Circle> = None;
    let mut consider = |c: Circle| {
        if best.is_none_or(|b| c.r < b.r) && points.iter().all(|&p| c.contains(p)) {
            best = Some(c);
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            consider(Circle::from_two(points[i], points[j]));
            for k in j + 1..n {
                consider(Circle::from_three(points[i], points[j], points[k]));
            }
        }
    }
    best
}
