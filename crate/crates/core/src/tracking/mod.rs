//! Camera-frame obstacle tracking and map registration.
//!
//! Tracks live in the camera ground plane `(north, east)` and move with a
//! velocity that is treated as a known input, re-estimated from recent
//! filtered states. Measurements are cluster centroids `(u, d)`.

pub mod assignment;
mod ekf;
mod tracker;

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::frames::{camera_to_map, project, CameraIntrinsics, CameraPoint, EgoPose, MapPoint};
use crate::stixel::{ObstacleSet, SemanticClass};

pub use ekf::{
    ekf_update, measurement, measurement_jacobian, predict, unprojection_jacobian, MotionModel,
};
pub use tracker::{TrackRecord, Tracker, TrackingParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
    #[error("track depth {0} m is too small to project")]
    BehindCamera(f64),
}

/// One filtered map registration of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapRecord {
    pub timestamp: f64,
    pub position: MapPoint,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    /// Camera-frame position `(north, east)`.
    pub state: Vector2<f64>,
    pub covariance: Matrix2<f64>,
    /// Camera-frame velocity relative to the ego vehicle.
    pub velocity: Vector2<f64>,
    pub label: SemanticClass,
    pub age: u32,
    /// Consecutive matched frames.
    pub hits: u32,
    /// Consecutive unmatched frames.
    pub misses: u32,
    pub confirmed: bool,
    /// `(u_center, v_t_center, d_center)` of the last associated obstacle.
    pub last_image_coords: (f64, f64, f64),
    /// Last three filtered states with their timestamps.
    pub history: Vec<(f64, Vector2<f64>)>,
    pub map_history: Vec<MapRecord>,
}

const VELOCITY_WINDOW: usize = 3;

impl Track {
    pub fn new(
        id: u64,
        state: Vector2<f64>,
        covariance: Matrix2<f64>,
        velocity: Vector2<f64>,
        label: SemanticClass,
        timestamp: f64,
    ) -> Self {
        Self {
            id,
            state,
            covariance,
            velocity,
            label,
            age: 1,
            hits: 1,
            misses: 0,
            confirmed: false,
            last_image_coords: (0.0, 0.0, 0.0),
            history: vec![(timestamp, state)],
            map_history: Vec::new(),
        }
    }

    pub fn camera_point(&self) -> CameraPoint {
        CameraPoint::new(self.state[0], self.state[1])
    }

    /// Stores the current filtered state and re-estimates the velocity by a
    /// finite difference across the stored window.
    pub fn record_state(&mut self, timestamp: f64) {
        self.history.push((timestamp, self.state));
        if self.history.len() > VELOCITY_WINDOW {
            self.history.remove(0);
        }
        let (t0, x0) = self.history[0];
        let (t1, x1) = self.history[self.history.len() - 1];
        if t1 > t0 {
            self.velocity = (x1 - x0) / (t1 - t0);
        }
    }
}

/// Coordinate shift of a tracked point by its flow vector.
pub fn flow_propagate(coords: (f64, f64), flow: (f64, f64)) -> (f64, f64) {
    (coords.0 + flow.0, coords.1 + flow.1)
}

/// One sparse optical-flow sample between the previous and current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector {
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
}

/// Mean flow `(du, dv)` per obstacle cluster id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowField {
    pub per_obstacle: BTreeMap<usize, (f64, f64)>,
}

impl FlowField {
    /// Averages the vectors that fall inside each obstacle's image extent,
    /// widened horizontally by `margin` pixels.
    pub fn from_vectors(vectors: &[FlowVector], obstacles: &ObstacleSet, margin: f64) -> Self {
        let mut per_obstacle = BTreeMap::new();
        for o in &obstacles.obstacles {
            let (u_lo, u_hi) = o.u_span();
            let (v_lo, v_hi) = o.v_span();
            let inside: Vec<_> = vectors
                .iter()
                .filter(|f| {
                    f.u >= u_lo - margin
                        && f.u <= u_hi + margin
                        && f.v >= v_lo
                        && f.v <= v_hi
                        && f.du.is_finite()
                        && f.dv.is_finite()
                })
                .collect();
            if !inside.is_empty() {
                let n = inside.len() as f64;
                let du = inside.iter().map(|f| f.du).sum::<f64>() / n;
                let dv = inside.iter().map(|f| f.dv).sum::<f64>() / n;
                per_obstacle.insert(o.cluster_id, (du, dv));
            }
        }
        Self { per_obstacle }
    }

    pub fn get(&self, cluster_id: usize) -> Option<(f64, f64)> {
        self.per_obstacle.get(&cluster_id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(track id, obstacle cluster id)`.
    pub matches: Vec<(u64, usize)>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_obstacles: Vec<usize>,
}

/// Gated cost of pairing a (predicted) track with an obstacle, or `None`
/// when the pair is not allowed.
pub fn association_cost(
    track: &Track,
    obstacle: &crate::stixel::ObstacleCluster,
    flow: &FlowField,
    gate: f64,
    cam: &CameraIntrinsics,
) -> Option<f64> {
    if track.label != obstacle.label {
        return None;
    }
    let (u_p, d_p) = project(track.camera_point(), cam).ok()?;
    let cost = (u_p - obstacle.u_center).hypot(d_p - obstacle.d_center);
    if cost > gate {
        return None;
    }
    if let Some(f) = flow.get(obstacle.cluster_id) {
        let (u_f, _) = flow_propagate((track.last_image_coords.0, track.last_image_coords.1), f);
        if (u_f - obstacle.u_center).abs() > gate {
            return None;
        }
    }
    Some(cost)
}

/// Optimal one-to-one association of predicted tracks with obstacles.
///
/// Leaving a track or an obstacle unmatched costs `gate`, so every allowed
/// pair is worth taking unless a cheaper global matching needs its members.
pub fn associate(
    tracks: &[Track],
    obstacles: &ObstacleSet,
    flow: &FlowField,
    gate: f64,
    cam: &CameraIntrinsics,
) -> Assignment {
    let costs: Vec<Vec<Option<f64>>> = tracks
        .iter()
        .map(|t| {
            obstacles
                .obstacles
                .iter()
                .map(|o| association_cost(t, o, flow, gate, cam))
                .collect()
        })
        .collect();
    let pairs = assignment::assign(&costs, gate);
    let mut track_used = vec![false; tracks.len()];
    let mut obstacle_used = vec![false; obstacles.obstacles.len()];
    let mut matches = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        track_used[i] = true;
        obstacle_used[j] = true;
        matches.push((tracks[i].id, obstacles.obstacles[j].cluster_id));
    }
    Assignment {
        matches,
        unmatched_tracks: tracks
            .iter()
            .zip(&track_used)
            .filter(|(_, used)| !**used)
            .map(|(t, _)| t.id)
            .collect(),
        unmatched_obstacles: obstacles
            .obstacles
            .iter()
            .zip(&obstacle_used)
            .filter(|(_, used)| !**used)
            .map(|(o, _)| o.cluster_id)
            .collect(),
    }
}

/// Registers the track on the map and appends the result to its history.
/// `ego_speed` converts the relative velocity into a ground speed.
pub fn localize_on_map(track: &mut Track, pose: &EgoPose, ego_speed: f64) -> MapPoint {
    let position = camera_to_map(track.camera_point(), pose);
    let speed = (track.velocity + Vector2::new(ego_speed, 0.0)).norm();
    let newer = track
        .map_history
        .last()
        .is_none_or(|last| pose.timestamp > last.timestamp);
    if newer {
        track.map_history.push(MapRecord {
            timestamp: pose.timestamp,
            position,
            speed,
        });
    }
    position
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Heading;
    use crate::stixel::{ObstacleCluster, SemanticStixel};
    use std::f64::consts::FRAC_PI_2;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::full_resolution()
    }

    fn obstacle(id: usize, u: f64, d: f64, label: SemanticClass) -> ObstacleCluster {
        let s = SemanticStixel {
            u,
            v_b: 400.0,
            v_t: 350.0,
            d,
            label,
        };
        ObstacleCluster {
            cluster_id: id,
            members: vec![s],
            u_center: u,
            v_t_center: 350.0,
            d_center: d,
            label,
        }
    }

    fn track_at(id: u64, u: f64, d: f64) -> Track {
        let p = crate::frames::unproject(u, d, &cam()).unwrap();
        let mut t = Track::new(
            id,
            Vector2::new(p.north, p.east),
            Matrix2::identity(),
            Vector2::zeros(),
            SemanticClass::Vehicle,
            0.0,
        );
        t.last_image_coords = (u, 350.0, d);
        t
    }

    #[test]
    fn flow_propagation_adds() {
        assert_eq!(flow_propagate((100.0, 50.0), (0.0, 0.0)), (100.0, 50.0));
        assert_eq!(flow_propagate((100.0, 50.0), (3.0, -2.0)), (103.0, 48.0));
        let two = flow_propagate(flow_propagate((1.0, 1.0), (2.0, 3.0)), (4.0, 5.0));
        assert_eq!(two, flow_propagate((1.0, 1.0), (6.0, 8.0)));
    }

    #[test]
    fn single_pair_within_gate_matches() {
        let tracks = vec![track_at(7, 600.0, 20.0)];
        let obs = ObstacleSet {
            timestamp: 0.0,
            obstacles: vec![obstacle(1, 605.0, 20.5, SemanticClass::Vehicle)],
        };
        let a = associate(&tracks, &obs, &FlowField::default(), 40.0, &cam());
        assert_eq!(a.matches, vec![(7, 1)]);
        assert!(a.unmatched_tracks.is_empty() && a.unmatched_obstacles.is_empty());
    }

    #[test]
    fn far_obstacle_and_label_mismatch_stay_unmatched() {
        let tracks = vec![track_at(1, 600.0, 20.0)];
        let obs = ObstacleSet {
            timestamp: 0.0,
            obstacles: vec![
                obstacle(1, 300.0, 20.0, SemanticClass::Vehicle),
                obstacle(2, 600.0, 20.0, SemanticClass::Pedestrian),
            ],
        };
        let a = associate(&tracks, &obs, &FlowField::default(), 40.0, &cam());
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_tracks, vec![1]);
        assert_eq!(a.unmatched_obstacles, vec![1, 2]);
    }

    #[test]
    fn flow_inconsistency_forbids_a_pair() {
        let tracks = vec![track_at(1, 600.0, 20.0)];
        let obs = ObstacleSet {
            timestamp: 0.0,
            obstacles: vec![obstacle(1, 610.0, 20.0, SemanticClass::Vehicle)],
        };
        let mut flow = FlowField::default();
        flow.per_obstacle.insert(1, (-80.0, 0.0));
        let a = associate(&tracks, &obs, &flow, 40.0, &cam());
        assert!(a.matches.is_empty());
        flow.per_obstacle.insert(1, (9.0, 0.0));
        assert_eq!(
            associate(&tracks, &obs, &flow, 40.0, &cam()).matches,
            vec![(1, 1)]
        );
    }

    #[test]
    fn flow_field_averages_vectors_inside_the_cluster() {
        let obs = ObstacleSet {
            timestamp: 0.0,
            obstacles: vec![obstacle(3, 100.0, 10.0, SemanticClass::Vehicle)],
        };
        let vectors = [
            FlowVector {
                u: 101.0,
                v: 380.0,
                du: 2.0,
                dv: 0.0,
            },
            FlowVector {
                u: 99.0,
                v: 360.0,
                du: 4.0,
                dv: 2.0,
            },
            FlowVector {
                u: 500.0,
                v: 360.0,
                du: 50.0,
                dv: 0.0,
            },
        ];
        let f = FlowField::from_vectors(&vectors, &obs, 2.5);
        assert_eq!(f.get(3), Some((3.0, 1.0)));
        assert_eq!(f.get(4), None);
    }

    #[test]
    fn map_registration_examples() {
        let mut t = track_at(1, 600.0, 20.0);
        t.state = Vector2::new(10.0, 2.0);
        let pose = EgoPose::new(MapPoint::new(100.0, 200.0), Heading::new(FRAC_PI_2), 1.0);
        let m = localize_on_map(&mut t, &pose, 0.0);
        assert!(m.distance(&MapPoint::new(98.0, 210.0)) < 1e-12);
        let origin = EgoPose::new(MapPoint::new(0.0, 0.0), Heading::new(0.0), 2.0);
        let m0 = localize_on_map(&mut t, &origin, 0.0);
        assert_eq!((m0.north, m0.east), (10.0, 2.0));
        assert_eq!(t.map_history.len(), 2);
        localize_on_map(&mut t, &origin, 0.0);
        assert_eq!(t.map_history.len(), 2);
    }

    #[test]
    fn velocity_comes_from_the_last_three_states() {
        let mut t = track_at(1, 600.0, 20.0);
        t.history = vec![(0.0, Vector2::new(10.0, 0.0))];
        t.state = Vector2::new(10.5, 0.1);
        t.record_state(0.1);
        assert!((t.velocity - Vector2::new(5.0, 1.0)).norm() < 1e-9);
        t.state = Vector2::new(11.0, 0.2);
        t.record_state(0.2);
        t.state = Vector2::new(11.2, 0.2);
        t.record_state(0.3);
        assert_eq!(t.history.len(), 3);
        assert!((t.velocity - Vector2::new(3.5, 0.5)).norm() < 1e-9);
    }
}
