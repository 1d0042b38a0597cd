//! Semantic stixels and their grouping into obstacles.

mod cluster;
pub mod dbscan;
mod extract;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{
    cluster_stixels, obstacle_centroid, ClusterParams, ObstacleCluster, ObstacleSet,
};
pub use extract::{extract_stixels, StixelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StixelError {
    #[error("disparity image is {disparity:?} but labels are {labels:?} and camera is {camera:?}")]
    DimensionMismatch {
        disparity: (u32, u32),
        labels: (u32, u32),
        camera: (u32, u32),
    },
    #[error("obstacle cluster has no members")]
    EmptyCluster,
}

/// Obstacle classes a stixel can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticClass {
    Vehicle,
    Pedestrian,
    Building,
    Other,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 4] = [
        SemanticClass::Vehicle,
        SemanticClass::Pedestrian,
        SemanticClass::Building,
        SemanticClass::Other,
    ];

    /// Vehicles and pedestrians; the classes that get tracked.
    pub fn is_traffic(self) -> bool {
        matches!(self, SemanticClass::Vehicle | SemanticClass::Pedestrian)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticClass::Vehicle => "vehicle",
            SemanticClass::Pedestrian => "pedestrian",
            SemanticClass::Building => "building",
            SemanticClass::Other => "other",
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SemanticClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown semantic class {s:?}"))
    }
}

/// One vertical obstacle slice: `[u, v_b, v_t, d, l]`.
///
/// Rows grow downward, so `v_t < v_b`; both rows belong to the stixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticStixel {
    pub u: f64,
    pub v_b: f64,
    pub v_t: f64,
    pub d: f64,
    pub label: SemanticClass,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StixelSet {
    pub timestamp: f64,
    pub stixels: Vec<SemanticStixel>,
}

impl StixelSet {
    pub fn count(&self, label: SemanticClass) -> usize {
        self.stixels.iter().filter(|s| s.label == label).count()
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
