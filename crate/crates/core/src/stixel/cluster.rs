use serde::{Deserialize, Serialize};

use super::dbscan::{self, Point};
use super::{median, SemanticClass, SemanticStixel, StixelError, StixelSet};
use crate::frames::{unproject, CameraIntrinsics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Neighborhood radius in the camera ground plane (m).
    pub eps: f64,
    pub min_pts: usize,
    /// When set, stixels of different classes are never neighbors.
    pub label_constrained: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps: 1.5,
            min_pts: 2,
            label_constrained: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleCluster {
    /// 1-based, numbered left to right by the cluster's leftmost column.
    pub cluster_id: usize,
    pub members: Vec<SemanticStixel>,
    pub u_center: f64,
    pub v_t_center: f64,
    pub d_center: f64,
    /// Majority class of the members (ties go to the earlier class).
    pub label: SemanticClass,
}

impl ObstacleCluster {
    pub fn u_span(&self) -> (f64, f64) {
        self.members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.u), hi.max(s.u))
            })
    }

    pub fn v_span(&self) -> (f64, f64) {
        self.members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.v_t), hi.max(s.v_b))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleSet {
    pub timestamp: f64,
    pub obstacles: Vec<ObstacleCluster>,
}

impl ObstacleSet {
    pub fn count(&self) -> usize {
        self.obstacles.len()
    }
}

/// Measured image position of a cluster: mean column, mean top row and
/// median disparity of its members.
pub fn obstacle_centroid(members: &[SemanticStixel]) -> Result<(f64, f64, f64), StixelError> {
    if members.is_empty() {
        return Err(StixelError::EmptyCluster);
    }
    let n = members.len() as f64;
    let u = members.iter().map(|s| s.u).sum::<f64>() / n;
    let v_t = members.iter().map(|s| s.v_t).sum::<f64>() / n;
    let mut ds: Vec<f64> = members.iter().map(|s| s.d).collect();
    Ok((u, v_t, median(&mut ds)))
}

fn majority(members: &[SemanticStixel]) -> SemanticClass {
    let mut counts = [0usize; 4];
    for s in members {
        counts[s.label as usize] += 1;
    }
    let best = (0..4)
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    SemanticClass::ALL[best]
}

/// DBSCAN over stixel ground-plane positions. Stixels that cannot be
/// unprojected and DBSCAN noise are dropped.
pub fn cluster_stixels(
    set: &StixelSet,
    cam: &CameraIntrinsics,
    params: &ClusterParams,
) -> ObstacleSet {
    let mut kept = Vec::with_capacity(set.stixels.len());
    let mut points = Vec::with_capacity(set.stixels.len());
    for s in &set.stixels {
        if let Ok(p) = unproject(s.u, s.d, cam) {
            kept.push(*s);
            points.push(Point {
                x: p.north,
                y: p.east,
                key: if params.label_constrained {
                    s.label as u32
                } else {
                    0
                },
            });
        }
    }
    let labels = dbscan::dbscan(&points, params.eps, params.min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<SemanticStixel>> = vec![Vec::new(); n_clusters];
    for (s, l) in kept.iter().zip(&labels) {
        if let Some(c) = l {
            groups[*c].push(*s);
        }
    }
    let mut obstacles: Vec<ObstacleCluster> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|members| {
            let (u_center, v_t_center, d_center) =
                obstacle_centroid(&members).expect("groups are non-empty");
            ObstacleCluster {
                cluster_id: 0,
                label: majority(&members),
                members,
                u_center,
                v_t_center,
                d_center,
            }
        })
        .collect();
    obstacles.sort_by(|a, b| {
        let (a_lo, _) = a.u_span();
        let (b_lo, _) = b.u_span();
        a_lo.total_cmp(&b_lo)
            .then(a.v_span().0.total_cmp(&b.v_span().0))
            .then(a.d_center.total_cmp(&b.d_center))
    });
    for (i, o) in obstacles.iter_mut().enumerate() {
        o.cluster_id = i + 1;
    }
    ObstacleSet {
        timestamp: set.timestamp,
        obstacles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics {
            f_u: 1000.0,
            b_prime: 0.4,
            c_u: 512.0,
            c_v: 384.0,
            width: 1024,
            height: 768,
        }
    }

    fn st(u: f64, d: f64, label: SemanticClass) -> SemanticStixel {
        SemanticStixel {
            u,
            v_b: 400.0,
            v_t: 300.0,
            d,
            label,
        }
    }

    #[test]
    fn centroid_examples() {
        let one = SemanticStixel {
            u: 100.0,
            v_b: 90.0,
            v_t: 50.0,
            d: 20.0,
            label: SemanticClass::Vehicle,
        };
        assert_eq!(obstacle_centroid(&[one]).unwrap(), (100.0, 50.0, 20.0));
        let three: Vec<_> = [(98.0, 19.0), (100.0, 20.0), (102.0, 21.0)]
            .iter()
            .map(|&(u, d)| SemanticStixel {
                u,
                d,
                v_t: 50.0,
                ..one
            })
            .collect();
        assert_eq!(obstacle_centroid(&three).unwrap(), (100.0, 50.0, 20.0));
        assert_eq!(obstacle_centroid(&[]), Err(StixelError::EmptyCluster));
    }

    #[test]
    fn adjacent_stixels_form_one_cluster() {
        let set = StixelSet {
            timestamp: 0.0,
            stixels: (0..10)
                .map(|i| st(600.0 + 5.0 * i as f64, 20.0, SemanticClass::Vehicle))
                .collect(),
        };
        let out = cluster_stixels(&set, &cam(), &ClusterParams::default());
        assert_eq!(out.count(), 1);
        assert_eq!(out.obstacles[0].members.len(), 10);
        assert_eq!(out.obstacles[0].cluster_id, 1);
    }

    #[test]
    fn groups_three_eps_apart_split() {
        // at 20 m, 1 px is 2 cm laterally; 3 * eps = 4.5 m is 225 px.
        let mut stixels: Vec<_> = (0..10)
            .map(|i| st(300.0 + 5.0 * i as f64, 20.0, SemanticClass::Vehicle))
            .collect();
        let right_start = 345.0 + 225.0 + 5.0;
        stixels.extend(
            (0..10).map(|i| st(right_start + 5.0 * i as f64, 20.0, SemanticClass::Vehicle)),
        );
        let out = cluster_stixels(
            &StixelSet {
                timestamp: 0.0,
                stixels,
            },
            &cam(),
            &ClusterParams::default(),
        );
        assert_eq!(out.count(), 2);
        assert!(out.obstacles[0].u_center < out.obstacles[1].u_center);
        assert_eq!(
            out.obstacles
                .iter()
                .map(|o| o.cluster_id)
                .collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn label_constraint_keeps_classes_apart() {
        let mut stixels: Vec<_> = (0..4)
            .map(|i| st(500.0 + 5.0 * i as f64, 20.0, SemanticClass::Vehicle))
            .collect();
        stixels.extend((0..3).map(|i| st(520.0 + 5.0 * i as f64, 20.0, SemanticClass::Pedestrian)));
        let set = StixelSet {
            timestamp: 0.0,
            stixels,
        };
        let constrained = cluster_stixels(&set, &cam(), &ClusterParams::default());
        assert_eq!(constrained.count(), 2);
        for o in &constrained.obstacles {
            assert!(o.members.iter().all(|m| m.label == o.label));
        }
        let agnostic = cluster_stixels(
            &set,
            &cam(),
            &ClusterParams {
                label_constrained: false,
                ..Default::default()
            },
        );
        assert_eq!(agnostic.count(), 1);
        assert_eq!(agnostic.obstacles[0].label, SemanticClass::Vehicle);
    }

    #[test]
    fn isolated_stixel_is_noise_and_far_disparity_is_dropped() {
        let stixels = vec![
            st(100.0, 20.0, SemanticClass::Vehicle),
            st(900.0, 20.0, SemanticClass::Vehicle),
            st(905.0, 0.3, SemanticClass::Vehicle),
        ];
        let out = cluster_stixels(
            &StixelSet {
                timestamp: 0.0,
                stixels,
            },
            &cam(),
            &ClusterParams::default(),
        );
        assert_eq!(out.count(), 0);
    }
}
