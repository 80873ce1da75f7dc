use std::collections::BTreeSet;

/// Shape measurements of a cluster's pixel footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures {
    /// Area of the convex hull of the occupied pixel squares.
    pub hull_area: f64,
    pub hull_perimeter: f64,
    /// Number of distinct occupied pixels.
    pub pixel_area: f64,
    /// `4πA / P²`; 1 for a disk.
    pub circularity: f64,
    /// Pixel area over hull area.
    pub solidity: f64,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear vertices.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

pub fn polygon_perimeter(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            (b.0 - a.0).hypot(b.1 - a.1)
        })
        .sum()
}

/// Hull features over the unit squares of the given pixels. Using the pixel
/// footprint rather than the pixel centres keeps the hull a superset of the
/// occupied area, so solidity never exceeds one. Returns `None` for fewer
/// than three distinct pixels.
pub fn shape_features(pixels: &[(u16, u16)]) -> Option<ShapeFeatures> {
    let distinct: BTreeSet<(u16, u16)> = pixels.iter().copied().collect();
    if distinct.len() < 3 {
        return None;
    }
    // only the extreme pixels of each row can contribute hull corners
    let mut rows: std::collections::BTreeMap<u16, (u16, u16)> = Default::default();
    for &(x, y) in &distinct {
        let e = rows.entry(y).or_insert((x, x));
        e.0 = e.0.min(x);
        e.1 = e.1.max(x);
    }
    let mut corners = Vec::with_capacity(rows.len() * 8);
    for (&y, &(lo, hi)) in &rows {
        let (y0, y1) = (y as f64 - 0.5, y as f64 + 0.5);
        for x in [lo as f64 - 0.5, hi as f64 + 0.5] {
            corners.push((x, y0));
            corners.push((x, y1));
        }
    }
    let hull = convex_hull(&corners);
    let hull_area = polygon_area(&hull);
    let hull_perimeter = polygon_perimeter(&hull);
    let pixel_area = distinct.len() as f64;
    Some(ShapeFeatures {
        hull_area,
        hull_perimeter,
        pixel_area,
        circularity: 4.0 * std::f64::consts::PI * hull_area / (hull_perimeter * hull_perimeter),
        solidity: pixel_area / hull_area,
    })
}
