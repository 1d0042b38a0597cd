//! Per-frame orchestration: stixels, clustering, ego localization, heading
//! correction, tracking and map registration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{unproject, CameraIntrinsics, CameraPoint, EgoPose};
use crate::io::{
    write_csv, write_track_log, Dataset, EgoEstimateRecord, FrameInput, IoError, TrackLogRecord,
};
use crate::localization::{InsReading, LocalizationError, LocalizationParams, ParticleFilter};
use crate::map::DigitalMap;
use crate::ndt::{build_ndt, estimate_heading, NdtError, NdtGrid, NdtParams};
use crate::stixel::{
    cluster_stixels, extract_stixels, ClusterParams, ObstacleSet, SemanticClass, StixelError,
    StixelParams, StixelSet,
};
use crate::tracking::{FlowField, TrackRecord, Tracker, TrackingParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Stixel(#[from] StixelError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error("building map for heading matching: {0}")]
    Ndt(#[from] NdtError),
    #[error("invalid pipeline config: {0}")]
    Config(String),
}

/// Heading matching settings beyond the NDT search itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadingParams {
    #[serde(flatten)]
    pub ndt: NdtParams,
    /// Matching runs only when at least this many building stixels are seen.
    pub min_building_stixels: usize,
    /// Building stixels farther than this are not used (m).
    pub max_range: f64,
    /// Edge sampling step for map building outlines (m).
    pub map_point_spacing: f64,
}

impl Default for HeadingParams {
    fn default() -> Self {
        Self {
            ndt: NdtParams::default(),
            min_building_stixels: 50,
            max_range: 60.0,
            map_point_spacing: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Correct the INS heading by building matching.
    pub heading_correction: bool,
    /// Use lane-line distances in the particle weights.
    pub lane_weighting: bool,
    /// Use semantic labels for detection: class-pure clusters, and only
    /// traffic classes are tracked. Off gives a label-agnostic stixel
    /// clustering baseline where every cluster is an obstacle.
    pub label_constrained: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            heading_correction: true,
            lane_weighting: true,
            label_constrained: true,
        }
    }
}

impl Ablation {
    /// Applies a `name=on|off` switch.
    pub fn set(&mut self, arg: &str) -> Result<(), PipelineError> {
        let (name, value) = arg
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("ablation {arg:?} is not name=on|off")))?;
        let on = match value.trim() {
            "on" | "true" => true,
            "off" | "false" => false,
            other => {
                return Err(PipelineError::Config(format!(
                    "ablation value {other:?} is not on/off"
                )))
            }
        };
        match name.trim() {
            "heading_correction" => self.heading_correction = on,
            "lane_weighting" => self.lane_weighting = on,
            "label_constrained" => self.label_constrained = on,
            other => return Err(PipelineError::Config(format!("unknown ablation {other:?}"))),
        }
        Ok(())
    }
}

/// All module parameters. Pixel-unit values (stixel width, association
/// gate, measurement noise, flow margin) are given for a 1000 px focal
/// length and rescaled to the actual camera by [`PipelineConfig::scaled_for`].
/// A module switch that is off either in its own block or in `ablation` is off.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Seed of the particle filter's random stream.
    pub seed: u64,
    pub stixel: StixelParams,
    pub cluster: ClusterParams,
    pub localization: LocalizationParams,
    pub heading: HeadingParams,
    pub tracking: TrackingParams,
    pub ablation: Ablation,
}

impl PipelineConfig {
    pub fn scaled_for(&self, cam: &CameraIntrinsics) -> Self {
        let s = cam.f_u / 1000.0;
        let mut out = self.clone();
        out.stixel.stixel_width = ((self.stixel.stixel_width as f64 * s).round() as u32).max(1);
        out.tracking.gate = self.tracking.gate * s;
        out.tracking.r = (self.tracking.r.0 * s * s, self.tracking.r.1 * s * s);
        out.tracking.flow_margin = self.tracking.flow_margin * s;
        out.cluster.label_constrained =
            self.cluster.label_constrained && self.ablation.label_constrained;
        out.tracking.traffic_only = self.tracking.traffic_only && self.ablation.label_constrained;
        out.localization.lane_weighting =
            self.localization.lane_weighting && self.ablation.lane_weighting;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingSource {
    Ndt,
    Ins,
}

impl HeadingSource {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadingSource::Ndt => "ndt",
            HeadingSource::Ins => "ins",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub pose: EgoPose,
    pub heading_source: HeadingSource,
    pub stixels: StixelSet,
    pub obstacles: ObstacleSet,
    pub records: Vec<TrackRecord>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    cam: CameraIntrinsics,
    map: DigitalMap,
    grid: Option<NdtGrid>,
    filter: ParticleFilter,
    tracker: Tracker,
    /// NDT heading minus INS heading from the last successful match.
    heading_bias: f64,
    last_timestamp: Option<f64>,
    nominal_dt: f64,
}

impl Pipeline {
    /// `cfg` is taken at reference resolution and rescaled for `cam`.
    pub fn new(
        cfg: &PipelineConfig,
        cam: CameraIntrinsics,
        map: DigitalMap,
        frame_rate: f64,
    ) -> Result<Self, PipelineError> {
        let cfg = cfg.scaled_for(&cam);
        cam.validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(frame_rate > 0.0) {
            return Err(PipelineError::Config("frame rate must be positive".into()));
        }
        let grid = if cfg.ablation.heading_correction {
            let points = map.building_points(cfg.heading.map_point_spacing);
            Some(build_ndt(
                &points,
                cfg.heading.ndt.cell_size,
                cfg.heading.ndt.eigen_floor,
            )?)
        } else {
            None
        };
        let filter = ParticleFilter::new(cfg.localization, cfg.seed)?;
        let tracker = Tracker::new(cfg.tracking);
        Ok(Self {
            cfg,
            cam,
            map,
            grid,
            filter,
            tracker,
            heading_bias: 0.0,
            last_timestamp: None,
            nominal_dt: 1.0 / frame_rate,
        })
    }

    /// Effective (rescaled) configuration.
    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    fn building_points(&self, stixels: &StixelSet) -> Vec<CameraPoint> {
        stixels
            .stixels
            .iter()
            .filter(|s| s.label == SemanticClass::Building)
            .filter_map(|s| unproject(s.u, s.d, &self.cam).ok())
            .filter(|p| p.range() <= self.cfg.heading.max_range)
            .collect()
    }

    pub fn run_frame(&mut self, frame: &FrameInput) -> Result<FrameOutput, PipelineError> {
        let stixels = extract_stixels(
            &frame.disparity,
            &frame.labels,
            &self.cam,
            &self.cfg.stixel,
            frame.timestamp,
        )?;
        let obstacles = cluster_stixels(&stixels, &self.cam, &self.cfg.cluster);
        let dt = match self.last_timestamp {
            Some(t) if frame.timestamp > t => frame.timestamp - t,
            _ => self.nominal_dt,
        };
        self.last_timestamp = Some(frame.timestamp);

        let prior = frame.ins.heading.offset(self.heading_bias);
        let ins = InsReading {
            heading: prior,
            ..frame.ins
        };
        let position = self
            .filter
            .step(&ins, &frame.gnss, &frame.lane_obs, prior, &self.map, dt);

        let mut theta = prior;
        let mut source = HeadingSource::Ins;
        if let Some(grid) = &self.grid {
            let points = self.building_points(&stixels);
            if points.len() >= self.cfg.heading.min_building_stixels {
                match estimate_heading(&points, position, grid, prior, &self.cfg.heading.ndt) {
                    Ok(h) => {
                        theta = h;
                        source = HeadingSource::Ndt;
                        self.heading_bias = h.diff(frame.ins.heading);
                    }
                    Err(e) => log::debug!(
                        "t={:.3}: heading matching fell back to INS ({e})",
                        frame.timestamp
                    ),
                }
            }
        }
        let pose = EgoPose::new(position, theta, frame.timestamp);

        let flow = FlowField::from_vectors(&frame.flow, &obstacles, self.cfg.tracking.flow_margin);
        let records = self.tracker.step(
            &obstacles,
            &flow,
            &self.cam,
            &pose,
            frame.ins.speed,
            dt,
            &self.map,
        );
        Ok(FrameOutput {
            pose,
            heading_source: source,
            stixels,
            obstacles,
            records,
        })
    }
}

/// Collected outputs of a whole run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub tracks: Vec<TrackLogRecord>,
    pub ego: Vec<EgoEstimateRecord>,
    pub skipped_frames: usize,
}

impl RunOutput {
    pub fn push(&mut self, out: &FrameOutput) {
        self.tracks
            .extend(out.records.iter().map(TrackLogRecord::from));
        self.ego.push(EgoEstimateRecord {
            timestamp: out.pose.timestamp,
            north: out.pose.position.north,
            east: out.pose.position.east,
            heading: out.pose.theta.radians(),
            heading_source: out.heading_source.as_str().to_string(),
        });
    }

    /// Writes `tracks.csv` and `ego_estimate.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        write_track_log(&dir.join(TRACKS_FILE), &self.tracks)?;
        write_csv(&dir.join(EGO_ESTIMATE_FILE), &self.ego)
    }
}

pub const TRACKS_FILE: &str = "tracks.csv";
pub const EGO_ESTIMATE_FILE: &str = "ego_estimate.csv";

/// Runs the pipeline over a frame stream. Frames that fail are logged and
/// skipped.
pub fn run_frames(
    cfg: &PipelineConfig,
    cam: CameraIntrinsics,
    map: &DigitalMap,
    frame_rate: f64,
    frames: impl IntoIterator<Item = FrameInput>,
) -> Result<RunOutput, PipelineError> {
    let mut pipeline = Pipeline::new(cfg, cam, map.clone(), frame_rate)?;
    let mut out = RunOutput::default();
    for frame in frames {
        match pipeline.run_frame(&frame) {
            Ok(o) => out.push(&o),
            Err(e) => {
                log::warn!("frame {} skipped: {e}", frame.index);
                out.skipped_frames += 1;
            }
        }
    }
    Ok(out)
}

/// Replays a recorded dataset. Unreadable frames abort the run.
pub fn run_dataset(
    cfg: &PipelineConfig,
    ds: &Dataset,
) -> Result<RunOutput, Box<dyn std::error::Error + Send + Sync>> {
    let mut pipeline = Pipeline::new(
        cfg,
        ds.scenario.camera,
        ds.map.clone(),
        ds.scenario.frame_rate,
    )?;
    let mut out = RunOutput::default();
    for index in 0..ds.len() {
        let frame = ds.frame(index)?;
        match pipeline.run_frame(&frame) {
            Ok(o) => out.push(&o),
            Err(e) => {
                log::warn!("frame {index} skipped: {e}");
                out.skipped_frames += 1;
            }
        }
    }
    Ok(out)
}

/// Outputs of an in-memory simulate-and-run pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub output: RunOutput,
    pub truth: Vec<crate::scenario::FrameTruth>,
    pub map: DigitalMap,
}

/// Simulates `scenario` and feeds the frames straight into the pipeline.
pub fn run_scenario(
    scenario: &crate::scenario::ScenarioConfig,
    cfg: &PipelineConfig,
) -> Result<ScenarioRun, Box<dyn std::error::Error + Send + Sync>> {
    let map = crate::scenario::build_intersection(scenario)?;
    let mut truth = Vec::with_capacity(scenario.frame_count());
    let frames = crate::scenario::simulate(scenario, &map)?.map(|f| {
        truth.push(f.truth.clone());
        FrameInput::from(&f)
    });
    let output = run_frames(cfg, scenario.camera, &map, scenario.frame_rate, frames)?;
    Ok(ScenarioRun { output, truth, map })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_parsing() {
        let mut a = Ablation::default();
        a.set("lane_weighting=off").unwrap();
        a.set(" heading_correction = false ").unwrap();
        assert!(!a.lane_weighting && !a.heading_correction && a.label_constrained);
        a.set("lane_weighting=on").unwrap();
        assert!(a.lane_weighting);
        assert!(a.set("lane_weighting").is_err());
        assert!(a.set("lane_weighting=maybe").is_err());
        assert!(a.set("warp_drive=on").is_err());
    }

    #[test]
    fn pixel_parameters_follow_the_focal_length() {
        let cfg = PipelineConfig::default();
        let full = cfg.scaled_for(&CameraIntrinsics::full_resolution());
        assert_eq!(full.stixel.stixel_width, cfg.stixel.stixel_width);
        assert_eq!(full.tracking.gate, cfg.tracking.gate);
        let mut cam = CameraIntrinsics::full_resolution();
        cam.f_u /= 4.0;
        let small = cfg.scaled_for(&cam);
        assert!((small.tracking.gate - cfg.tracking.gate / 4.0).abs() < 1e-12);
        assert!((small.tracking.r.0 - cfg.tracking.r.0 / 16.0).abs() < 1e-12);
        assert!(small.stixel.stixel_width >= 1);
    }

    #[test]
    fn label_switch_reaches_clustering_and_tracking() {
        let mut cfg = PipelineConfig::default();
        let cam = CameraIntrinsics::full_resolution();
        assert!(cfg.scaled_for(&cam).cluster.label_constrained);
        cfg.ablation.set("label_constrained=off").unwrap();
        let s = cfg.scaled_for(&cam);
        assert!(!s.cluster.label_constrained && !s.tracking.traffic_only);
        cfg.ablation.set("lane_weighting=off").unwrap();
        assert!(!cfg.scaled_for(&cam).localization.lane_weighting);
    }
}
