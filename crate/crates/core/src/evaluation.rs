//! Detection and tracking metrics against simulator ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frames::MapPoint;
use crate::io::TrackLogRecord;
use crate::map::LaneAssignment;
use crate::scenario::FrameTruth;
use crate::stixel::SemanticClass;
use crate::tracking::assignment::assign;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub position: MapPoint,
    pub label: SemanticClass,
    pub track_id: u64,
    pub lane: LaneAssignment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthObject {
    pub position: MapPoint,
    pub label: SemanticClass,
    pub id: u32,
    pub lane: LaneAssignment,
    /// Objects that are not evaluated may absorb detections but are never
    /// counted as hits or misses.
    pub evaluated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameEval {
    pub timestamp: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub misses: usize,
    /// `(detection index, truth index)` for every match with an evaluated truth.
    pub matches: Vec<(usize, usize)>,
}

/// Optimal one-to-one matching of detections to truths of the same label
/// within `radius` meters.
pub fn match_frame(
    timestamp: f64,
    detections: &[Detection],
    truth: &[TruthObject],
    radius: f64,
) -> FrameEval {
    assert!(radius > 0.0, "radius must be positive");
    let costs: Vec<Vec<Option<f64>>> = detections
        .iter()
        .map(|d| {
            truth
                .iter()
                .map(|t| {
                    let dist = d.position.distance(&t.position);
                    (d.label == t.label && dist <= radius).then_some(dist)
                })
                .collect()
        })
        .collect();
    let pairs = assign(&costs, radius);
    let mut eval = FrameEval {
        timestamp,
        ..Default::default()
    };
    let mut det_used = vec![false; detections.len()];
    for &(i, j) in &pairs {
        det_used[i] = true;
        if truth[j].evaluated {
            eval.matches.push((i, j));
        }
    }
    eval.true_positives = eval.matches.len();
    eval.false_positives = det_used.iter().filter(|u| !**u).count();
    eval.misses = truth.iter().filter(|t| t.evaluated).count() - eval.true_positives;
    eval
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEval {
    pub truth_id: u32,
    pub label: SemanticClass,
    pub frames: usize,
    pub coverage: f64,
    pub dominant_track: Option<u64>,
    pub mostly_tracked: bool,
    pub mostly_lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub match_radius: f64,
    pub mt_threshold: f64,
    pub ml_threshold: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            match_radius: 2.0,
            mt_threshold: 0.8,
            ml_threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub frames: usize,
    pub ground_truth_objects: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub misses: usize,
    pub detection_rate: f64,
    pub false_positive_rate: f64,
    pub frames_with_false_positives: usize,
    pub trajectories: usize,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
    pub mostly_tracked_ratio: f64,
    pub mostly_lost_ratio: f64,
    pub lane_matched_vehicles: usize,
    pub lane_correct_vehicles: usize,
    pub lane_localization_rate: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-trajectory coverage: the fraction of a truth object's scored frames
/// in which it was matched to its most frequent track id.
pub fn track_coverage(
    per_frame: &[(FrameEval, Vec<Detection>, Vec<TruthObject>)],
    params: &EvalParams,
) -> Vec<TrackEval> {
    let mut scored: BTreeMap<u32, (SemanticClass, usize)> = BTreeMap::new();
    let mut hits: BTreeMap<u32, BTreeMap<u64, usize>> = BTreeMap::new();
    for (eval, dets, truth) in per_frame {
        for t in truth.iter().filter(|t| t.evaluated) {
            scored.entry(t.id).or_insert((t.label, 0)).1 += 1;
        }
        for &(i, j) in &eval.matches {
            *hits
                .entry(truth[j].id)
                .or_default()
                .entry(dets[i].track_id)
                .or_default() += 1;
        }
    }
    scored
        .into_iter()
        .map(|(id, (label, frames))| {
            let dominant = hits
                .get(&id)
                .and_then(|h| h.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))))
                .map(|(tid, n)| (*tid, *n));
            let coverage = ratio(dominant.map_or(0, |d| d.1), frames);
            TrackEval {
                truth_id: id,
                label,
                frames,
                coverage,
                dominant_track: dominant.map(|d| d.0),
                mostly_tracked: coverage > params.mt_threshold,
                mostly_lost: coverage < params.ml_threshold,
            }
        })
        .collect()
}

/// Groups a track log by frame and scores it against per-frame truth.
pub fn evaluate(tracks: &[TrackLogRecord], truth: &[FrameTruth], params: &EvalParams) -> Report {
    let mut by_time: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for r in tracks {
        by_time
            .entry(r.timestamp.to_bits())
            .or_default()
            .push(Detection {
                position: r.position(),
                label: r.label,
                track_id: r.track_id,
                lane: r.lane(),
            });
    }
    let mut frames: Vec<&FrameTruth> = truth.iter().collect();
    frames.sort_by(|a, b| a.ego.timestamp.total_cmp(&b.ego.timestamp));
    let per_frame: Vec<_> = frames
        .iter()
        .map(|f| {
            let mut dets = by_time
                .remove(&f.ego.timestamp.to_bits())
                .unwrap_or_default();
            dets.sort_by_key(|d| d.track_id);
            let objs: Vec<TruthObject> = f
                .actors
                .iter()
                .filter(|a| a.class.is_traffic())
                .map(|a| TruthObject {
                    position: a.position,
                    label: a.class,
                    id: a.id,
                    lane: a.lane,
                    evaluated: a.evaluated,
                })
                .collect();
            let eval = match_frame(f.ego.timestamp, &dets, &objs, params.match_radius);
            (eval, dets, objs)
        })
        .collect();
    aggregate(&per_frame, params)
}

pub fn aggregate(
    per_frame: &[(FrameEval, Vec<Detection>, Vec<TruthObject>)],
    params: &EvalParams,
) -> Report {
    let tp: usize = per_frame.iter().map(|f| f.0.true_positives).sum();
    let fp: usize = per_frame.iter().map(|f| f.0.false_positives).sum();
    let misses: usize = per_frame.iter().map(|f| f.0.misses).sum();
    let detections: usize = per_frame.iter().map(|f| f.1.len()).sum();
    let frames_with_fp = per_frame.iter().filter(|f| f.0.false_positives > 0).count();
    let mut lane_matched = 0;
    let mut lane_correct = 0;
    for (eval, dets, truth) in per_frame {
        for &(i, j) in &eval.matches {
            if truth[j].label == SemanticClass::Vehicle {
                lane_matched += 1;
                if dets[i].lane == truth[j].lane {
                    lane_correct += 1;
                }
            }
        }
    }
    let tracks = track_coverage(per_frame, params);
    let mt = tracks.iter().filter(|t| t.mostly_tracked).count();
    let ml = tracks.iter().filter(|t| t.mostly_lost).count();
    Report {
        frames: per_frame.len(),
        ground_truth_objects: tp + misses,
        detections,
        true_positives: tp,
        false_positives: fp,
        misses,
        detection_rate: ratio(tp, tp + misses),
        false_positive_rate: ratio(fp, detections),
        frames_with_false_positives: frames_with_fp,
        trajectories: tracks.len(),
        mostly_tracked: mt,
        mostly_lost: ml,
        mostly_tracked_ratio: ratio(mt, tracks.len()),
        mostly_lost_ratio: ratio(ml, tracks.len()),
        lane_matched_vehicles: lane_matched,
        lane_correct_vehicles: lane_correct,
        lane_localization_rate: ratio(lane_correct, lane_matched),
    }
}

impl Report {
    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let pct = |x: f64| format!("{:.1}%", 100.0 * x);
        let rows = [
            ("frames", self.frames.to_string()),
            ("detection rate", pct(self.detection_rate)),
            (
                "false positive rate",
                format!("{:.2}%", 100.0 * self.false_positive_rate),
            ),
            (
                "frames with false positive",
                self.frames_with_false_positives.to_string(),
            ),
            ("true positives", self.true_positives.to_string()),
            ("false positives", self.false_positives.to_string()),
            ("misses", self.misses.to_string()),
            ("trajectories", self.trajectories.to_string()),
            (
                "mostly tracked",
                format!(
                    "{} ({})",
                    self.mostly_tracked,
                    pct(self.mostly_tracked_ratio)
                ),
            ),
            (
                "mostly lost",
                format!("{} ({})", self.mostly_lost, pct(self.mostly_lost_ratio)),
            ),
            (
                "lane localization rate",
                format!(
                    "{} ({}/{})",
                    pct(self.lane_localization_rate),
                    self.lane_correct_vehicles,
                    self.lane_matched_vehicles
                ),
            ),
        ];
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are plain numbers")
    }
}
