//! Heading estimation by Normal Distributions Transform matching of
//! stixel-observed building points against map building outlines.
//!
//! The map side is summarized as per-cell Gaussians. Observed points are
//! rotated by a candidate heading, translated to the ego position and scored
//! against those Gaussians. Position stays fixed; only the heading is searched.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{rotate2d, CameraPoint, Heading, MapPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NdtError {
    #[error("no grid cell holds at least {MIN_CELL_POINTS} points")]
    InsufficientPoints,
    #[error("no observed building points")]
    NoObservations,
    #[error("best alignment score {score:.3} per point is below the floor {floor:.3}")]
    LowConfidence { score: f64, floor: f64 },
}

pub const MIN_CELL_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NdtParams {
    pub cell_size: f64,
    /// Covariance eigenvalues are floored at this fraction of the largest one.
    pub eigen_floor: f64,
    /// Half width of the heading search window around the prior (deg).
    pub window_deg: f64,
    pub coarse_step_deg: f64,
    pub fine_resolution_deg: f64,
    /// Minimum best score divided by the number of observed points.
    pub min_mean_score: f64,
}

impl Default for NdtParams {
    fn default() -> Self {
        Self {
            cell_size: 2.0,
            eigen_floor: 0.01,
            window_deg: 15.0,
            coarse_step_deg: 0.5,
            fine_resolution_deg: 0.02,
            min_mean_score: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdtCell {
    pub mean: MapPoint,
    pub covariance: Matrix2<f64>,
    pub information: Matrix2<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdtGrid {
    pub cell_size: f64,
    pub cells: BTreeMap<(i64, i64), NdtCell>,
}

impl NdtGrid {
    pub fn cell_index(&self, p: &MapPoint) -> (i64, i64) {
        (
            (p.north / self.cell_size).floor() as i64,
            (p.east / self.cell_size).floor() as i64,
        )
    }

    /// Sum of the Gaussian likelihoods of `p` under the cell it falls in and
    /// its eight neighbors, so the score stays continuous across cell borders.
    pub fn point_score(&self, p: &MapPoint) -> f64 {
        let (i, j) = self.cell_index(p);
        let mut total = 0.0;
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(cell) = self.cells.get(&(i + di, j + dj)) {
                    let r = Vector2::new(p.north - cell.mean.north, p.east - cell.mean.east);
                    total += (-0.5 * (r.transpose() * cell.information * r)[(0, 0)]).exp();
                }
            }
        }
        total
    }
}

/// Builds the per-cell Gaussians. Cells with fewer than three points are
/// left out.
pub fn build_ndt(
    map_points: &[MapPoint],
    cell_size: f64,
    eigen_floor: f64,
) -> Result<NdtGrid, NdtError> {
    assert!(cell_size > 0.0, "cell_size must be positive");
    let mut grid = NdtGrid {
        cell_size,
        cells: BTreeMap::new(),
    };
    let mut buckets: BTreeMap<(i64, i64), Vec<MapPoint>> = BTreeMap::new();
    for p in map_points {
        buckets.entry(grid.cell_index(p)).or_default().push(*p);
    }
    for (key, mut pts) in buckets {
        if pts.len() < MIN_CELL_POINTS {
            continue;
        }
        // fixed summation order regardless of input order
        pts.sort_by(|a, b| a.north.total_cmp(&b.north).then(a.east.total_cmp(&b.east)));
        let n = pts.len() as f64;
        let mean = pts
            .iter()
            .fold(MapPoint::default(), |acc, p| acc.add(p))
            .scale(1.0 / n);
        let mut cov = Matrix2::zeros();
        for p in &pts {
            let r = Vector2::new(p.north - mean.north, p.east - mean.east);
            cov += r * r.transpose();
        }
        cov /= n;
        let covariance = regularize(cov, eigen_floor);
        let information = covariance
            .try_inverse()
            .expect("regularized covariance is positive definite");
        grid.cells.insert(
            key,
            NdtCell {
                mean,
                covariance,
                information,
                count: pts.len(),
            },
        );
    }
    if grid.cells.is_empty() {
        return Err(NdtError::InsufficientPoints);
    }
    Ok(grid)
}

fn regularize(cov: Matrix2<f64>, floor_ratio: f64) -> Matrix2<f64> {
    let eig = SymmetricEigen::new(cov);
    // coincident points have no spread at all; fall back to a small disc
    let lmax = eig.eigenvalues.max().max(1e-4);
    let floored = eig.eigenvalues.map(|l| l.max(floor_ratio * lmax));
    let v = eig.eigenvectors;
    let r = v * Matrix2::from_diagonal(&floored) * v.transpose();
    0.5 * (r + r.transpose())
}

/// Transforms stixel points by `theta` and `ego`, then sums their cell likelihoods.
pub fn ndt_score(
    theta: Heading,
    stixel_points: &[CameraPoint],
    ego: MapPoint,
    grid: &NdtGrid,
) -> f64 {
    stixel_points
        .iter()
        .map(|b| {
            let m = rotate2d(theta, MapPoint::new(b.north, b.east)).add(&ego);
            grid.point_score(&m)
        })
        .sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Heading maximizing [`ndt_score`] within `window_deg` of `theta_init`:
/// a coarse sweep, then golden-section refinement around the best sample.
pub fn estimate_heading(
    stixel_points: &[CameraPoint],
    ego: MapPoint,
    grid: &NdtGrid,
    theta_init: Heading,
    params: &NdtParams,
) -> Result<Heading, NdtError> {
    if stixel_points.is_empty() {
        return Err(NdtError::NoObservations);
    }
    let score = |offset_deg: f64| {
        ndt_score(
            theta_init.offset(offset_deg.to_radians()),
            stixel_points,
            ego,
            grid,
        )
    };

    let steps = (params.window_deg / params.coarse_step_deg).round() as i64;
    let (mut best_off, mut best) = (0.0, f64::NEG_INFINITY);
    for k in -steps..=steps {
        let off = k as f64 * params.coarse_step_deg;
        let s = score(off);
        // strict comparison keeps the offset closest to the sweep start on ties
        if s > best {
            best = s;
            best_off = off;
        }
    }

    let (mut a, mut b) = (
        (best_off - params.coarse_step_deg).max(-params.window_deg),
        (best_off + params.coarse_step_deg).min(params.window_deg),
    );
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    while b - a > params.fine_resolution_deg {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = score(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fmid = score(mid);
    if fmid >= best {
        best = fmid;
        best_off = mid;
    }

    let mean = best / stixel_points.len() as f64;
    if mean < params.min_mean_score {
        return Err(NdtError::LowConfidence {
            score: mean,
            floor: params.min_mean_score,
        });
    }
    Ok(theta_init.offset(best_off.to_radians()))
}
