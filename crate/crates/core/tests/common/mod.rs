//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use scene_core::stixel::dbscan::Point;

/// O(n²) DBSCAN: cores are points with at least `min_pts` neighbors within
/// `eps` (self included, different keys never neighbors); clusters are
/// connected components of cores; a border point takes the cluster of its
/// nearest core, lowest index on ties.
pub fn dbscan_reference(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let d = |a: usize, b: usize| {
        if points[a].key != points[b].key {
            f64::INFINITY
        } else {
            ((points[a].x - points[b].x).powi(2) + (points[a].y - points[b].y).powi(2)).sqrt()
        }
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| d(i, j) <= eps).count() >= min_pts.max(1))
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if core[i] && core[j] && d(i, j) <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut labels = vec![None; n];
    for i in 0..n {
        if core[i] {
            labels[i] = Some(find(&mut parent, i));
        }
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (j, _) in core.iter().enumerate().filter(|(_, &c)| c) {
            if d(i, j) <= eps && best.is_none_or(|(bd, _)| d(i, j) < bd) {
                best = Some((d(i, j), j));
            }
        }
        labels[i] = best.map(|(_, j)| find(&mut parent, j));
    }
    labels
}

/// True when both labelings induce the same partition and the same noise set.
pub fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: BTreeMap<usize, usize> = BTreeMap::new();
    let mut back: BTreeMap<usize, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (None, None) => {}
            (Some(x), Some(y)) => {
                if *fwd.entry(*x).or_insert(*y) != *y || *back.entry(*y).or_insert(*x) != *x {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Minimum total cost over every partial one-to-one matching, where each
/// unmatched row or column costs `unmatched` and `None` pairs are forbidden.
pub fn assignment_reference(costs: &[Vec<Option<f64>>], unmatched: f64) -> f64 {
    let n = costs.len();
    let m = costs.first().map_or(0, |r| r.len());
    fn go(
        costs: &[Vec<Option<f64>>],
        row: usize,
        used: &mut Vec<bool>,
        matched: usize,
        acc: f64,
        unmatched: f64,
        best: &mut f64,
    ) {
        let n = costs.len();
        let m = used.len();
        if row == n {
            let total = acc + unmatched * (n + m - 2 * matched) as f64;
            if total < *best {
                *best = total;
            }
            return;
        }
        go(costs, row + 1, used, matched, acc, unmatched, best);
        for j in 0..m {
            if let (false, Some(c)) = (used[j], costs[row][j]) {
                used[j] = true;
                go(costs, row + 1, used, matched + 1, acc + c, unmatched, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(costs, 0, &mut vec![false; m], 0, 0.0, unmatched, &mut best);
    if n == 0 {
        best = unmatched * m as f64;
    }
    best
}
