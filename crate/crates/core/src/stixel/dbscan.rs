//! DBSCAN over planar points with an optional per-point group key.
//!
//! Points with different keys are never neighbors. The result is fully
//! determined by the input set: core points form connected components, and
//! each border point joins the component of its nearest core neighbor (ties
//! to the lowest point index), so the output does not depend on visiting
//! order. Components are numbered by their lowest point index.

use std::collections::HashMap;

/// Cluster index per input point, `None` for noise.
pub type Labels = Vec<Option<usize>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub key: u32,
}

fn dist(a: &Point, b: &Point) -> f64 {
    if a.key != b.key {
        f64::INFINITY
    } else {
        (a.x - b.x).hypot(a.y - b.y)
    }
}

/// Uniform grid with `eps`-sized cells, so neighbors sit in the 3x3 block.
struct Grid {
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Point], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        Grid { eps, cells }
    }

    fn cell(p: &Point, eps: f64) -> (i64, i64) {
        ((p.x / eps).floor() as i64, (p.y / eps).floor() as i64)
    }

    fn neighbors(&self, points: &[Point], i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = &points[i];
        let (cx, cy) = Self::cell(p, self.eps);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| dist(p, &points[j]) <= self.eps),
                    );
                }
            }
        }
        out.sort_unstable();
    }
}

/// Clusters `points`; a point is core when at least `min_pts` points
/// (itself included) lie within `eps`.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Labels {
    assert!(eps > 0.0, "eps must be positive");
    let n = points.len();
    let grid = Grid::new(points, eps);
    let mut neigh: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut buf = Vec::new();
    for i in 0..n {
        grid.neighbors(points, i, &mut buf);
        neigh.push(buf.clone());
    }
    let is_core: Vec<bool> = neigh.iter().map(|nb| nb.len() >= min_pts.max(1)).collect();

    let mut labels: Labels = vec![None; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for seed in 0..n {
        if !is_core[seed] || labels[seed].is_some() {
            continue;
        }
        labels[seed] = Some(next);
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for &j in &neigh[i] {
                if is_core[j] && labels[j].is_none() {
                    labels[j] = Some(next);
                    stack.push(j);
                }
            }
        }
        next += 1;
    }

    for i in 0..n {
        if is_core[i] {
            continue;
        }
        let nearest_core = neigh[i]
            .iter()
            .copied()
            .filter(|&j| is_core[j])
            .min_by(|&a, &b| {
                dist(&points[i], &points[a])
                    .total_cmp(&dist(&points[i], &points[b]))
                    .then(a.cmp(&b))
            });
        labels[i] = nearest_core.and_then(|j| labels[j]);
    }
    labels
}
