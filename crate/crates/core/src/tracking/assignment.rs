//! Minimum-cost one-to-one assignment with optional pairs.
//!
//! Rows and columns may stay unassigned at a fixed per-item cost, so the
//! objective is `sum(matched costs) + unmatched_cost * (unmatched rows +
//! unmatched columns)`. Solved exactly by the Hungarian method on the
//! usual `(n + m)` square augmentation.

/// Effectively infinite cost for forbidden cells of the augmented matrix.
const FORBIDDEN: f64 = 1e15;

/// Solves a square assignment problem; returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials formulation; column 0 is a virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Optimal partial matching over the allowed (`Some`) cells of an `n x m`
/// cost table. Returns `(row, col)` pairs sorted by row.
pub fn assign(costs: &[Vec<Option<f64>>], unmatched_cost: f64) -> Vec<(usize, usize)> {
    let n = costs.len();
    let m = costs.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let size = n + m;
    let mut square = vec![vec![FORBIDDEN; size]; size];
    for i in 0..n {
        for j in 0..m {
            if let Some(c) = costs[i][j] {
                square[i][j] = c;
            }
        }
        square[i][m + i] = unmatched_cost;
    }
    for j in 0..m {
        square[n + j][j] = unmatched_cost;
        for k in 0..n {
            square[n + j][m + k] = 0.0;
        }
    }
    let col_of = hungarian(&square);
    (0..n)
        .filter_map(|i| {
            let j = col_of[i];
            (j < m && costs[i][j].is_some()).then_some((i, j))
        })
        .collect()
}

/// Objective value of a matching under [`assign`]'s cost model.
pub fn matching_cost(
    costs: &[Vec<Option<f64>>],
    unmatched_cost: f64,
    matches: &[(usize, usize)],
) -> f64 {
    let n = costs.len();
    let m = costs.first().map_or(0, |r| r.len());
    let matched: f64 = matches
        .iter()
        .map(|&(i, j)| costs[i][j].expect("matched pair must be allowed"))
        .sum();
    matched + unmatched_cost * (n + m - 2 * matches.len()) as f64
}
