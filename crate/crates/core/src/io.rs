//! On-disk formats: scenario datasets, track logs and ego estimates.
//!
//! A dataset directory holds
//!
//! ```text
//! scenario.toml     generating config (camera, frame rate, seed, ...)
//! map.toml          digital map
//! sensor_log.csv    timestamp,gnss_north,gnss_east,ins_speed,ins_heading,lane_left,lane_right,lane_valid
//! flow.csv          timestamp,u,v,du,dv
//! truth.csv         timestamp,actor_id,label,north,east,heading,speed,lane,evaluated
//! ego_truth.csv     timestamp,north,east,heading,speed,lane
//! images/disparity_NNNNN.png, images/labels_NNNNN.png
//! ```
//!
//! Headings are radians, clockwise from north. Floats are written in their
//! shortest round-trip form, so reading a file back is exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{EgoPose, Heading, MapPoint};
use crate::localization::{GnssReading, InsReading, LaneObservation};
use crate::map::{DigitalMap, LaneAssignment, MapError};
use crate::raster::{DisparityImage, LabelImage, RasterError};
use crate::scenario::{ActorTruth, FrameTruth, ScenarioConfig, SensorFrame};
use crate::stixel::SemanticClass;
use crate::tracking::{FlowVector, TrackRecord};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing file {0}")]
    Missing(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes a header-only file when `rows` is empty, so readers always find
/// the column names.
fn write_csv_with_header<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[T],
) -> Result<(), IoError> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        w.write_record(header).map_err(csv_err(path))?;
        return w.flush().map_err(io_err(path));
    }
    write_csv(path, rows)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub timestamp: f64,
    pub gnss_north: f64,
    pub gnss_east: f64,
    pub ins_speed: f64,
    pub ins_heading: f64,
    pub lane_left: f64,
    pub lane_right: f64,
    pub lane_valid: bool,
}

impl SensorRecord {
    pub fn gnss(&self) -> GnssReading {
        GnssReading {
            position: MapPoint::new(self.gnss_north, self.gnss_east),
            timestamp: self.timestamp,
        }
    }

    pub fn ins(&self) -> InsReading {
        InsReading {
            speed: self.ins_speed,
            heading: Heading::new(self.ins_heading),
            timestamp: self.timestamp,
        }
    }

    pub fn lane_obs(&self) -> LaneObservation {
        LaneObservation {
            dist_left: self.lane_left,
            dist_right: self.lane_right,
            valid: self.lane_valid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub timestamp: f64,
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub timestamp: f64,
    pub actor_id: u32,
    pub label: SemanticClass,
    pub north: f64,
    pub east: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane: String,
    pub evaluated: bool,
}

impl TruthRecord {
    pub fn lane(&self) -> LaneAssignment {
        self.lane.parse().unwrap_or(LaneAssignment::OffRoad)
    }

    pub fn position(&self) -> MapPoint {
        MapPoint::new(self.north, self.east)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoTruthRecord {
    pub timestamp: f64,
    pub north: f64,
    pub east: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLogRecord {
    pub timestamp: f64,
    pub track_id: u64,
    pub label: SemanticClass,
    pub map_north: f64,
    pub map_east: f64,
    pub speed_mps: f64,
    pub lane_assignment: String,
}

pub const TRACK_LOG_HEADER: [&str; 7] = [
    "timestamp",
    "track_id",
    "label",
    "map_north",
    "map_east",
    "speed_mps",
    "lane_assignment",
];

impl From<&TrackRecord> for TrackLogRecord {
    fn from(r: &TrackRecord) -> Self {
        Self {
            timestamp: r.timestamp,
            track_id: r.track_id,
            label: r.label,
            map_north: r.map_north,
            map_east: r.map_east,
            speed_mps: r.speed_mps,
            lane_assignment: r.lane.to_string(),
        }
    }
}

impl TrackLogRecord {
    pub fn position(&self) -> MapPoint {
        MapPoint::new(self.map_north, self.map_east)
    }

    pub fn lane(&self) -> LaneAssignment {
        self.lane_assignment
            .parse()
            .unwrap_or(LaneAssignment::OffRoad)
    }
}

pub fn write_track_log(path: &Path, records: &[TrackLogRecord]) -> Result<(), IoError> {
    write_csv_with_header(path, &TRACK_LOG_HEADER, records)
}

pub fn read_track_log(path: &Path) -> Result<Vec<TrackLogRecord>, IoError> {
    read_csv(path)
}

/// Fused ego pose per frame, as estimated by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoEstimateRecord {
    pub timestamp: f64,
    pub north: f64,
    pub east: f64,
    pub heading: f64,
    /// `ndt` when building matching supplied the heading, else `ins`.
    pub heading_source: String,
}

impl EgoEstimateRecord {
    pub fn pose(&self) -> EgoPose {
        EgoPose::new(
            MapPoint::new(self.north, self.east),
            Heading::new(self.heading),
            self.timestamp,
        )
    }
}

/// Everything the pipeline consumes for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub index: usize,
    pub timestamp: f64,
    pub disparity: DisparityImage,
    pub labels: LabelImage,
    pub gnss: GnssReading,
    pub ins: InsReading,
    pub lane_obs: LaneObservation,
    pub flow: Vec<FlowVector>,
}

impl From<&SensorFrame> for FrameInput {
    fn from(f: &SensorFrame) -> Self {
        Self {
            index: f.index,
            timestamp: f.timestamp,
            disparity: f.disparity.clone(),
            labels: f.labels.clone(),
            gnss: f.gnss,
            ins: f.ins,
            lane_obs: f.lane_obs,
            flow: f.flow.clone(),
        }
    }
}

pub fn sensor_record(f: &SensorFrame) -> SensorRecord {
    SensorRecord {
        timestamp: f.timestamp,
        gnss_north: f.gnss.position.north,
        gnss_east: f.gnss.position.east,
        ins_speed: f.ins.speed,
        ins_heading: f.ins.heading.radians(),
        lane_left: f.lane_obs.dist_left,
        lane_right: f.lane_obs.dist_right,
        lane_valid: f.lane_obs.valid,
    }
}

pub fn truth_records(f: &SensorFrame) -> Vec<TruthRecord> {
    f.truth
        .actors
        .iter()
        .map(|a| TruthRecord {
            timestamp: f.timestamp,
            actor_id: a.id,
            label: a.class,
            north: a.position.north,
            east: a.position.east,
            heading: a.heading.radians(),
            speed: a.speed,
            lane: a.lane.to_string(),
            evaluated: a.evaluated,
        })
        .collect()
}

pub fn ego_truth_record(f: &SensorFrame) -> EgoTruthRecord {
    EgoTruthRecord {
        timestamp: f.timestamp,
        north: f.truth.ego.position.north,
        east: f.truth.ego.position.east,
        heading: f.truth.ego.theta.radians(),
        speed: f.truth.ego_speed,
        lane: f.truth.ego_lane.to_string(),
    }
}

/// Ground truth regrouped per frame.
pub fn truth_frames(records: &[TruthRecord], ego: &[EgoTruthRecord]) -> Vec<FrameTruth> {
    let mut by_time: BTreeMap<u64, Vec<ActorTruth>> = BTreeMap::new();
    for r in records {
        by_time
            .entry(r.timestamp.to_bits())
            .or_default()
            .push(ActorTruth {
                id: r.actor_id,
                class: r.label,
                position: r.position(),
                heading: Heading::new(r.heading),
                speed: r.speed,
                lane: r.lane(),
                evaluated: r.evaluated,
            });
    }
    ego.iter()
        .map(|e| FrameTruth {
            ego: EgoPose::new(
                MapPoint::new(e.north, e.east),
                Heading::new(e.heading),
                e.timestamp,
            ),
            ego_speed: e.speed,
            ego_lane: e.lane.parse().unwrap_or(LaneAssignment::OffRoad),
            actors: by_time.remove(&e.timestamp.to_bits()).unwrap_or_default(),
        })
        .collect()
}

pub fn disparity_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("images").join(format!("disparity_{index:05}.png"))
}

pub fn labels_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("images").join(format!("labels_{index:05}.png"))
}

pub fn save_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = toml::to_string(value).map_err(|e| format_err(path, e.to_string()))?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Writes a full dataset for the given frames; returns the number written.
pub fn write_dataset(
    dir: &Path,
    cfg: &ScenarioConfig,
    map: &DigitalMap,
    frames: impl IntoIterator<Item = SensorFrame>,
) -> Result<usize, IoError> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(io_err(&images))?;
    save_toml(&dir.join("scenario.toml"), cfg)?;
    map.save(&dir.join("map.toml"))?;
    let mut sensors = Vec::new();
    let mut flow = Vec::new();
    let mut truth = Vec::new();
    let mut ego = Vec::new();
    for f in frames {
        f.disparity.save_png(&disparity_path(dir, f.index))?;
        f.labels.save_png(&labels_path(dir, f.index))?;
        sensors.push(sensor_record(&f));
        flow.extend(f.flow.iter().map(|v| FlowRecord {
            timestamp: f.timestamp,
            u: v.u,
            v: v.v,
            du: v.du,
            dv: v.dv,
        }));
        truth.extend(truth_records(&f));
        ego.push(ego_truth_record(&f));
    }
    write_csv(&dir.join("sensor_log.csv"), &sensors)?;
    write_csv_with_header(
        &dir.join("flow.csv"),
        &["timestamp", "u", "v", "du", "dv"],
        &flow,
    )?;
    write_csv_with_header(
        &dir.join("truth.csv"),
        &[
            "timestamp",
            "actor_id",
            "label",
            "north",
            "east",
            "heading",
            "speed",
            "lane",
            "evaluated",
        ],
        &truth,
    )?;
    write_csv(&dir.join("ego_truth.csv"), &ego)?;
    Ok(sensors.len())
}

/// A recorded dataset opened for replay. Images are read lazily per frame.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub map: DigitalMap,
    pub sensors: Vec<SensorRecord>,
    flow: BTreeMap<u64, Vec<FlowVector>>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, IoError> {
        let scenario: ScenarioConfig = load_toml(&dir.join("scenario.toml"))?;
        let map_path = dir.join("map.toml");
        if !map_path.exists() {
            return Err(IoError::Missing(map_path));
        }
        let map = DigitalMap::load(&map_path)?;
        let sensors: Vec<SensorRecord> = read_csv(&dir.join("sensor_log.csv"))?;
        let mut flow: BTreeMap<u64, Vec<FlowVector>> = BTreeMap::new();
        for r in read_csv::<FlowRecord>(&dir.join("flow.csv"))? {
            flow.entry(r.timestamp.to_bits())
                .or_default()
                .push(FlowVector {
                    u: r.u,
                    v: r.v,
                    du: r.du,
                    dv: r.dv,
                });
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            scenario,
            map,
            sensors,
            flow,
        })
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn frame(&self, index: usize) -> Result<FrameInput, IoError> {
        let s = self
            .sensors
            .get(index)
            .ok_or_else(|| format_err(&self.dir, format!("no frame {index}")))?;
        Ok(FrameInput {
            index,
            timestamp: s.timestamp,
            disparity: DisparityImage::load_png(&disparity_path(&self.dir, index))?,
            labels: LabelImage::load_png(&labels_path(&self.dir, index))?,
            gnss: s.gnss(),
            ins: s.ins(),
            lane_obs: s.lane_obs(),
            flow: self
                .flow
                .get(&s.timestamp.to_bits())
                .cloned()
                .unwrap_or_default(),
        })
    }

    pub fn truth(&self) -> Result<Vec<FrameTruth>, IoError> {
        load_truth(&self.dir)
    }
}

pub fn load_truth(dir: &Path) -> Result<Vec<FrameTruth>, IoError> {
    let actors: Vec<TruthRecord> = read_csv(&dir.join("truth.csv"))?;
    let ego: Vec<EgoTruthRecord> = read_csv(&dir.join("ego_truth.csv"))?;
    Ok(truth_frames(&actors, &ego))
}
