use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{
    associate, ekf_update, localize_on_map, predict, unprojection_jacobian, FlowField, MotionModel,
    Track,
};
use crate::frames::{project, unproject, CameraIntrinsics, EgoPose, EPSILON_DEPTH};
use crate::map::{DigitalMap, LaneAssignment};
use crate::stixel::{ObstacleCluster, ObstacleSet, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingParams {
    /// Process noise diagonal (m²).
    pub q: (f64, f64),
    /// Measurement noise diagonal on `(u, d)` (px²).
    pub r: (f64, f64),
    /// Association gate (px).
    pub gate: f64,
    /// Ground speed given to new tracks along the ego heading (m/s).
    pub initial_speed: f64,
    pub confirm_hits: u32,
    pub max_misses: u32,
    /// Distance from the visible surface to the object center along the
    /// viewing ray (m).
    pub vehicle_center_offset: f64,
    pub pedestrian_center_offset: f64,
    /// Horizontal slack (px) when collecting flow vectors for a cluster.
    pub flow_margin: f64,
    /// Obstacles whose centered depth exceeds this are ignored (m).
    pub max_range: f64,
    /// Upper bound on the re-estimated ground speed (m/s).
    pub max_speed: f64,
    /// Track only vehicle and pedestrian clusters; otherwise every cluster.
    pub traffic_only: bool,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self {
            q: (0.25, 0.25),
            r: (4.0, 1.0),
            gate: 40.0,
            initial_speed: 6.0,
            confirm_hits: 3,
            max_misses: 5,
            vehicle_center_offset: 1.5,
            pedestrian_center_offset: 0.25,
            flow_margin: 2.5,
            max_range: 60.0,
            max_speed: 20.0,
            traffic_only: true,
        }
    }
}

impl TrackingParams {
    pub fn motion_model(&self, dt: f64) -> MotionModel {
        MotionModel::diagonal(dt, self.q, self.r)
    }

    fn center_offset(&self, label: SemanticClass) -> f64 {
        match label {
            SemanticClass::Vehicle => self.vehicle_center_offset,
            SemanticClass::Pedestrian => self.pedestrian_center_offset,
            _ => 0.0,
        }
    }
}

/// One line of the track log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub timestamp: f64,
    pub track_id: u64,
    pub label: SemanticClass,
    pub map_north: f64,
    pub map_east: f64,
    pub speed_mps: f64,
    pub lane: LaneAssignment,
}

/// Track table plus lifecycle policy. Ids are handed out in increasing
/// order and never reused.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: TrackingParams,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackingParams) -> Self {
        Self {
            params,
            tracks: Vec::new(),
            next_id: 1,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Moves the measured centroid from the visible surface to the object
    /// center by pushing it back along its viewing ray; `u` is unchanged.
    fn centered(&self, o: &ObstacleCluster, cam: &CameraIntrinsics) -> Option<ObstacleCluster> {
        let p = unproject(o.u_center, o.d_center, cam).ok()?;
        let range = p.range();
        let scale = (range + self.params.center_offset(o.label)) / range;
        if p.north * scale > self.params.max_range {
            return None;
        }
        let mut out = o.clone();
        out.d_center = cam.bf() / (p.north * scale);
        Some(out)
    }

    /// Runs one predict / associate / update / lifecycle cycle and returns a
    /// record for every track that was updated or created in this frame.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        obstacles: &ObstacleSet,
        flow: &FlowField,
        cam: &CameraIntrinsics,
        pose: &EgoPose,
        ego_speed: f64,
        dt: f64,
        map: &DigitalMap,
    ) -> Vec<TrackRecord> {
        let model = self.params.motion_model(dt);
        let timestamp = obstacles.timestamp;
        let mut tracks: Vec<Track> = self
            .tracks
            .iter()
            .map(|t| predict(t, &model))
            .filter(|t| t.state[0] > EPSILON_DEPTH)
            .collect();

        let measured = ObstacleSet {
            timestamp,
            obstacles: obstacles
                .obstacles
                .iter()
                .filter(|o| !self.params.traffic_only || o.label.is_traffic())
                .filter_map(|o| self.centered(o, cam))
                .collect(),
        };
        let assignment = associate(&tracks, &measured, flow, self.params.gate, cam);

        let mut touched = Vec::new();
        let mut failed = Vec::new();
        for &(track_id, cluster_id) in &assignment.matches {
            let i = tracks
                .iter()
                .position(|t| t.id == track_id)
                .expect("matched track exists");
            let o = measured
                .obstacles
                .iter()
                .find(|o| o.cluster_id == cluster_id)
                .expect("matched obstacle exists");
            match ekf_update(
                &tracks[i],
                Vector2::new(o.u_center, o.d_center),
                cam,
                &model,
            ) {
                Ok(mut t) => {
                    t.age += 1;
                    t.hits += 1;
                    t.misses = 0;
                    t.confirmed |= t.hits >= self.params.confirm_hits;
                    t.last_image_coords = (o.u_center, o.v_t_center, o.d_center);
                    t.record_state(timestamp);
                    clamp_ground_speed(&mut t, ego_speed, self.params.max_speed);
                    tracks[i] = t;
                    touched.push(track_id);
                }
                Err(e) => {
                    log::debug!("track {track_id}: update skipped ({e})");
                    failed.push(track_id);
                }
            }
        }
        for t in tracks.iter_mut() {
            if assignment.unmatched_tracks.contains(&t.id) || failed.contains(&t.id) {
                t.age += 1;
                t.hits = 0;
                t.misses += 1;
                if let Ok((u, d)) = project(t.camera_point(), cam) {
                    t.last_image_coords = (u, t.last_image_coords.1, d);
                }
            }
        }
        tracks.retain(|t| t.misses < self.params.max_misses);

        for &cluster_id in &assignment.unmatched_obstacles {
            let o = measured
                .obstacles
                .iter()
                .find(|o| o.cluster_id == cluster_id)
                .expect("unmatched obstacle exists");
            if let Some(t) = self.spawn(o, cam, ego_speed, timestamp) {
                touched.push(t.id);
                tracks.push(t);
            }
        }

        let mut records = Vec::with_capacity(touched.len());
        for t in tracks.iter_mut().filter(|t| touched.contains(&t.id)) {
            let position = localize_on_map(t, pose, ego_speed);
            let speed = t.map_history.last().map_or(0.0, |r| r.speed);
            records.push(TrackRecord {
                timestamp,
                track_id: t.id,
                label: t.label,
                map_north: position.north,
                map_east: position.east,
                speed_mps: speed,
                lane: map.assign_lane(&position),
            });
        }
        records.sort_by_key(|r| r.track_id);
        self.tracks = tracks;
        records
    }

    fn spawn(
        &mut self,
        o: &ObstacleCluster,
        cam: &CameraIntrinsics,
        ego_speed: f64,
        timestamp: f64,
    ) -> Option<Track> {
        let p = unproject(o.u_center, o.d_center, cam).ok()?;
        let j = unprojection_jacobian(o.u_center, o.d_center, cam);
        let r = Matrix2::new(self.params.r.0, 0.0, 0.0, self.params.r.1);
        let covariance = super::ekf::symmetrize(&(j * r * j.transpose()));
        let velocity = Vector2::new(self.params.initial_speed - ego_speed, 0.0);
        let mut t = Track::new(
            self.next_id,
            Vector2::new(p.north, p.east),
            covariance,
            velocity,
            o.label,
            timestamp,
        );
        t.last_image_coords = (o.u_center, o.v_t_center, o.d_center);
        self.next_id += 1;
        Some(t)
    }
}

fn clamp_ground_speed(t: &mut Track, ego_speed: f64, max_speed: f64) {
    let ego = Vector2::new(ego_speed, 0.0);
    let ground = t.velocity + ego;
    let speed = ground.norm();
    if speed > max_speed {
        t.velocity = ground * (max_speed / speed) - ego;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{Heading, MapPoint};
    use crate::map::Lane;
    use crate::stixel::SemanticStixel;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::full_resolution()
    }

    fn map() -> DigitalMap {
        DigitalMap {
            buildings: vec![],
            lanes: vec![Lane {
                id: 1,
                centerline: vec![MapPoint::new(-100.0, 0.0), MapPoint::new(100.0, 0.0)],
                width: 3.5,
            }],
            intersection: vec![],
        }
    }

    fn obstacle_at(north: f64, east: f64, t: f64) -> ObstacleSet {
        let (u, d) = project(crate::frames::CameraPoint::new(north, east), &cam()).unwrap();
        let s = SemanticStixel {
            u,
            v_b: 400.0,
            v_t: 350.0,
            d,
            label: SemanticClass::Vehicle,
        };
        ObstacleSet {
            timestamp: t,
            obstacles: vec![ObstacleCluster {
                cluster_id: 1,
                members: vec![s],
                u_center: u,
                v_t_center: 350.0,
                d_center: d,
                label: SemanticClass::Vehicle,
            }],
        }
    }

    fn params() -> TrackingParams {
        TrackingParams {
            vehicle_center_offset: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn fresh_obstacle_spawns_a_tentative_track_at_six_mps() {
        let mut tr = Tracker::new(params());
        let pose = EgoPose::new(MapPoint::new(0.0, 0.0), Heading::new(0.0), 0.0);
        let recs = tr.step(
            &obstacle_at(20.0, 0.0, 0.0),
            &FlowField::default(),
            &cam(),
            &pose,
            4.0,
            1.0 / 15.0,
            &map(),
        );
        assert_eq!(recs.len(), 1);
        let t = &tr.tracks()[0];
        assert_eq!((t.age, t.confirmed), (1, false));
        assert!((recs[0].speed_mps - 6.0).abs() < 1e-12);
        assert_eq!(recs[0].lane, LaneAssignment::Lane(1));
        assert!((recs[0].map_north - 20.0).abs() < 1e-9);
    }

    #[test]
    fn track_is_confirmed_then_deleted_after_misses() {
        let mut tr = Tracker::new(params());
        let dt = 1.0 / 15.0;
        let mut pose = EgoPose::new(MapPoint::new(0.0, 0.0), Heading::new(0.0), 0.0);
        for k in 0..3 {
            pose.timestamp = k as f64 * dt;
            tr.step(
                &obstacle_at(20.0, 0.5, pose.timestamp),
                &FlowField::default(),
                &cam(),
                &pose,
                6.0,
                dt,
                &map(),
            );
        }
        assert_eq!(tr.tracks().len(), 1);
        assert!(tr.tracks()[0].confirmed);
        let id = tr.tracks()[0].id;
        for k in 3..7 {
            pose.timestamp = k as f64 * dt;
            let empty = ObstacleSet {
                timestamp: pose.timestamp,
                obstacles: vec![],
            };
            tr.step(
                &empty,
                &FlowField::default(),
                &cam(),
                &pose,
                6.0,
                dt,
                &map(),
            );
            assert_eq!(tr.tracks().len(), 1, "still alive after {} misses", k - 2);
        }
        let empty = ObstacleSet {
            timestamp: 1.0,
            obstacles: vec![],
        };
        tr.step(
            &empty,
            &FlowField::default(),
            &cam(),
            &pose,
            6.0,
            dt,
            &map(),
        );
        assert!(tr.tracks().is_empty());
        pose.timestamp = 2.0;
        let recs = tr.step(
            &obstacle_at(20.0, 0.5, 2.0),
            &FlowField::default(),
            &cam(),
            &pose,
            6.0,
            dt,
            &map(),
        );
        assert!(recs[0].track_id > id);
    }

    #[test]
    fn center_offset_pushes_the_measurement_back_along_the_ray() {
        let tr = Tracker::new(TrackingParams {
            vehicle_center_offset: 1.0,
            ..Default::default()
        });
        let o = &obstacle_at(30.0, 40.0, 0.0).obstacles[0];
        let c = tr.centered(o, &cam()).unwrap();
        let p = unproject(c.u_center, c.d_center, &cam()).unwrap();
        assert!((p.range() - 51.0).abs() < 1e-9);
        assert_eq!(c.u_center, o.u_center);
    }

    #[test]
    fn ground_speed_is_bounded() {
        let mut t = Track::new(
            1,
            Vector2::new(10.0, 0.0),
            Matrix2::identity(),
            Vector2::new(-60.0, 0.0),
            SemanticClass::Vehicle,
            0.0,
        );
        clamp_ground_speed(&mut t, 5.0, 20.0);
        assert!(((t.velocity + Vector2::new(5.0, 0.0)).norm() - 20.0).abs() < 1e-9);
        let mut slow = t.clone();
        slow.velocity = Vector2::new(1.0, 0.5);
        clamp_ground_speed(&mut slow, 5.0, 20.0);
        assert_eq!(slow.velocity, Vector2::new(1.0, 0.5));
    }

    #[test]
    fn distant_obstacles_are_ignored() {
        let mut tr = Tracker::new(params());
        let pose = EgoPose::default();
        let recs = tr.step(
            &obstacle_at(80.0, 0.0, 0.0),
            &FlowField::default(),
            &cam(),
            &pose,
            0.0,
            0.1,
            &map(),
        );
        assert!(recs.is_empty());
    }

    #[test]
    fn other_classes_are_not_tracked() {
        let mut tr = Tracker::new(params());
        let mut obs = obstacle_at(20.0, 0.0, 0.0);
        obs.obstacles[0].label = SemanticClass::Building;
        let pose = EgoPose::default();
        let recs = tr.step(&obs, &FlowField::default(), &cam(), &pose, 0.0, 0.1, &map());
        assert!(recs.is_empty() && tr.tracks().is_empty());
    }
}
