use std::collections::HashMap;

/// Cluster assignment per input point; `None` marks noise.
pub type Labels = Vec<Option<usize>>;

/// Uniform grid over the points with cell size `eps`, so an `eps`-ball only
/// touches the 3x3 neighbouring cells.
struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[(f64, f64)], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(*p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: (f64, f64), cell: f64) -> (i64, i64) {
        ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64)
    }

    fn neighbours(&self, points: &[(f64, f64)], i: usize, eps2: f64, out: &mut Vec<usize>) {
        out.clear();
        let p = points[i];
        let (cx, cy) = Self::key(p, self.cell);
        for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                let Some(bucket) = self.buckets.get(&(gx, gy)) else {
                    continue;
                };
                for &j in bucket {
                    let q = points[j];
                    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
                    if dx * dx + dy * dy <= eps2 {
                        out.push(j);
                    }
                }
            }
        }
    }
}

/// Density-based clustering. A point is core when at least `min_samples`
/// points (itself included) lie within distance `eps`; clusters are the
/// connected components of core points plus their border points. Clusters are
/// numbered in order of discovery, scanning points by index, and a border
/// point reachable from several clusters joins the first one discovered.
pub fn dbscan(points: &[(f64, f64)], eps: f64, min_samples: usize) -> Labels {
    let n = points.len();
    let mut labels: Labels = vec![None; n];
    if n == 0 || eps <= 0.0 {
        return labels;
    }
    let eps2 = eps * eps;
    let grid = Grid::new(points, eps);
    let mut visited = vec![false; n];
    let mut nbrs = Vec::new();
    let mut queue = Vec::new();
    let mut next = 0;

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        grid.neighbours(points, i, eps2, &mut nbrs);
        if nbrs.len() < min_samples {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[i] = Some(cluster);
        queue.clear();
        queue.extend_from_slice(&nbrs);
        while let Some(j) = queue.pop() {
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            grid.neighbours(points, j, eps2, &mut nbrs);
            if nbrs.len() >= min_samples {
                queue.extend(nbrs.iter().copied().filter(|&k| !visited[k] || labels[k].is_none()));
            }
        }
    }
    labels
}

/// Groups point indices by label, dropping noise and clusters whose size is
/// outside `[min_size, max_size]`. Each group keeps ascending index order.
pub fn groups(labels: &Labels, min_size: usize, max_size: usize) -> Vec<Vec<usize>> {
    let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out[*c].push(i);
        }
    }
    out.retain(|g| g.len() >= min_size && g.len() <= max_size);
    out
}
