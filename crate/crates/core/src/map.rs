//! Digital map: building footprints, lane centerlines and the intersection area.
//!
//! On disk the map is a TOML document:
//!
//! ```toml
//! [[building]]
//! polygon = [[10.0, 10.0], [10.0, 60.0], [60.0, 60.0], [60.0, 10.0]]
//!
//! [[lane]]
//! id = 1
//! width = 3.5
//! centerline = [[-150.0, 1.75], [150.0, 1.75]]
//!
//! [intersection]
//! polygon = [[-7.0, -7.0], [-7.0, 7.0], [7.0, 7.0], [7.0, -7.0]]
//! ```
//!
//! Coordinates are `[north, east]` pairs in meters. Polygons are implicitly
//! closed; lane centerlines point in the direction of travel.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{Heading, MapPoint};
use crate::geom;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("map parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("map encode: {0}")]
    Encode(#[from] toml::ser::Error),
    #[error("invalid map: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: u32,
    pub centerline: Vec<MapPoint>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DigitalMap {
    pub buildings: Vec<Vec<MapPoint>>,
    pub lanes: Vec<Lane>,
    pub intersection: Vec<MapPoint>,
}

/// Where a map point sits in the road layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LaneAssignment {
    Lane(u32),
    Intersection,
    OffRoad,
}

impl fmt::Display for LaneAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LaneAssignment::Lane(id) => write!(f, "{id}"),
            LaneAssignment::Intersection => write!(f, "intersection"),
            LaneAssignment::OffRoad => write!(f, "offroad"),
        }
    }
}

impl FromStr for LaneAssignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "intersection" => Ok(LaneAssignment::Intersection),
            "offroad" => Ok(LaneAssignment::OffRoad),
            other => other
                .parse::<u32>()
                .map(LaneAssignment::Lane)
                .map_err(|_| format!("bad lane assignment {other:?}")),
        }
    }
}

const TIE_TOLERANCE: f64 = 1e-9;

impl DigitalMap {
    pub fn validate(&self) -> Result<(), MapError> {
        if self.lanes.is_empty() {
            return Err(MapError::Invalid("map has no lanes".into()));
        }
        for lane in &self.lanes {
            if lane.width <= 2.0 {
                return Err(MapError::Invalid(format!(
                    "lane {} width {} must exceed 2 m",
                    lane.id, lane.width
                )));
            }
            if lane.centerline.len() < 2 {
                return Err(MapError::Invalid(format!(
                    "lane {} centerline too short",
                    lane.id
                )));
            }
        }
        let mut ids: Vec<u32> = self.lanes.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.lanes.len() {
            return Err(MapError::Invalid("duplicate lane ids".into()));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            if !geom::polygon_is_simple(b) {
                return Err(MapError::Invalid(format!(
                    "building {i} is not a simple polygon"
                )));
            }
        }
        if !self.intersection.is_empty() && !geom::polygon_is_simple(&self.intersection) {
            return Err(MapError::Invalid(
                "intersection polygon is not simple".into(),
            ));
        }
        Ok(())
    }

    pub fn lane(&self, id: u32) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn in_intersection(&self, p: &MapPoint) -> bool {
        geom::point_in_polygon(p, &self.intersection)
    }

    /// Nearest lane whose corridor contains `p`, together with its projection.
    /// `direction` restricts the search to lanes running within 45 degrees of
    /// that heading (either way).
    fn nearest_lane(
        &self,
        p: &MapPoint,
        direction: Option<Heading>,
    ) -> Option<(&Lane, geom::PolylineProjection)> {
        let mut best: Option<(&Lane, geom::PolylineProjection)> = None;
        for lane in &self.lanes {
            let Some(proj) = geom::project_on_polyline(p, &lane.centerline) else {
                continue;
            };
            if !proj.interior || proj.distance > lane.width / 2.0 {
                continue;
            }
            if let Some(h) = direction {
                if proj.tangent.dot(&h.forward()).abs() < std::f64::consts::FRAC_1_SQRT_2 {
                    continue;
                }
            }
            let better = match &best {
                None => true,
                Some((b, bp)) => {
                    proj.distance < bp.distance - TIE_TOLERANCE
                        || ((proj.distance - bp.distance).abs() <= TIE_TOLERANCE && lane.id < b.id)
                }
            };
            if better {
                best = Some((lane, proj));
            }
        }
        best
    }

    /// Lane, intersection area, or off-road. Points inside the intersection
    /// polygon always map to the intersection; otherwise the nearest
    /// centerline wins if within half its lane width, ties to the lower id.
    pub fn assign_lane(&self, p: &MapPoint) -> LaneAssignment {
        if self.in_intersection(p) {
            return LaneAssignment::Intersection;
        }
        match self.nearest_lane(p, None) {
            Some((lane, _)) => LaneAssignment::Lane(lane.id),
            None => LaneAssignment::OffRoad,
        }
    }

    /// Distances from `p` to the left and right lines of the lane it drives
    /// in, as seen by a vehicle facing `heading`. `None` off every lane
    /// corridor roughly aligned with `heading`.
    pub fn lane_line_distances(&self, p: &MapPoint, heading: Heading) -> Option<(f64, f64)> {
        let (lane, proj) = self.nearest_lane(p, Some(heading))?;
        let offset = p.sub(&proj.closest).dot(&heading.right());
        let half = lane.width / 2.0;
        Some((half + offset, half - offset))
    }

    /// Building outlines sampled every `spacing` meters.
    pub fn building_points(&self, spacing: f64) -> Vec<MapPoint> {
        self.buildings
            .iter()
            .flat_map(|b| geom::sample_polygon_edges(b, spacing))
            .collect()
    }

    pub fn from_toml_str(s: &str) -> Result<Self, MapError> {
        let file: MapFile = toml::from_str(s)?;
        let map = file.into_map();
        map.validate()?;
        Ok(map)
    }

    pub fn to_toml_string(&self) -> Result<String, MapError> {
        Ok(toml::to_string(&MapFile::from_map(self))?)
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), MapError> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    #[serde(default, rename = "building")]
    buildings: Vec<PolygonEntry>,
    #[serde(default, rename = "lane")]
    lanes: Vec<LaneEntry>,
    #[serde(default)]
    intersection: Option<PolygonEntry>,
}

#[derive(Serialize, Deserialize)]
struct PolygonEntry {
    polygon: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct LaneEntry {
    id: u32,
    width: f64,
    centerline: Vec<[f64; 2]>,
}

fn to_points(v: &[[f64; 2]]) -> Vec<MapPoint> {
    v.iter().map(|[n, e]| MapPoint::new(*n, *e)).collect()
}

fn to_pairs(v: &[MapPoint]) -> Vec<[f64; 2]> {
    v.iter().map(|p| [p.north, p.east]).collect()
}

impl MapFile {
    fn into_map(self) -> DigitalMap {
        DigitalMap {
            buildings: self
                .buildings
                .iter()
                .map(|b| to_points(&b.polygon))
                .collect(),
            lanes: self
                .lanes
                .iter()
                .map(|l| Lane {
                    id: l.id,
                    width: l.width,
                    centerline: to_points(&l.centerline),
                })
                .collect(),
            intersection: self
                .intersection
                .map(|p| to_points(&p.polygon))
                .unwrap_or_default(),
        }
    }

    fn from_map(map: &DigitalMap) -> Self {
        MapFile {
            buildings: map
                .buildings
                .iter()
                .map(|b| PolygonEntry {
                    polygon: to_pairs(b),
                })
                .collect(),
            lanes: map
                .lanes
                .iter()
                .map(|l| LaneEntry {
                    id: l.id,
                    width: l.width,
                    centerline: to_pairs(&l.centerline),
                })
                .collect(),
            intersection: (!map.intersection.is_empty()).then(|| PolygonEntry {
                polygon: to_pairs(&map.intersection),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_lane_map() -> DigitalMap {
        DigitalMap {
            buildings: vec![geom::rectangle(10.0, 20.0, 10.0, 20.0)],
            lanes: vec![
                Lane {
                    id: 2,
                    centerline: vec![MapPoint::new(-100.0, 1.75), MapPoint::new(100.0, 1.75)],
                    width: 3.5,
                },
                Lane {
                    id: 1,
                    centerline: vec![MapPoint::new(100.0, -1.75), MapPoint::new(-100.0, -1.75)],
                    width: 3.5,
                },
            ],
            intersection: geom::rectangle(-5.0, 5.0, -5.0, 5.0),
        }
    }

    #[test]
    fn point_on_centerline_gets_that_lane() {
        let m = two_lane_map();
        assert_eq!(
            m.assign_lane(&MapPoint::new(30.0, 1.75)),
            LaneAssignment::Lane(2)
        );
        assert_eq!(
            m.assign_lane(&MapPoint::new(-30.0, -1.75)),
            LaneAssignment::Lane(1)
        );
    }

    #[test]
    fn equidistant_point_goes_to_lower_id() {
        let m = two_lane_map();
        assert_eq!(
            m.assign_lane(&MapPoint::new(30.0, 0.0)),
            LaneAssignment::Lane(1)
        );
    }

    #[test]
    fn far_point_is_off_road_and_center_is_intersection() {
        let m = two_lane_map();
        assert_eq!(
            m.assign_lane(&MapPoint::new(30.0, 50.0)),
            LaneAssignment::OffRoad
        );
        assert_eq!(
            m.assign_lane(&MapPoint::new(0.0, 1.75)),
            LaneAssignment::Intersection
        );
    }

    #[test]
    fn lane_line_distances_follow_heading() {
        let m = two_lane_map();
        let (l, r) = m
            .lane_line_distances(&MapPoint::new(30.0, 2.25), Heading::new(0.0))
            .unwrap();
        assert!((l - 2.25).abs() < 1e-12 && (r - 1.25).abs() < 1e-12);
        // facing south, left and right swap
        let (l, r) = m
            .lane_line_distances(
                &MapPoint::new(30.0, 2.25),
                Heading::new(std::f64::consts::PI),
            )
            .unwrap();
        assert!((l - 1.25).abs() < 1e-12 && (r - 2.25).abs() < 1e-12);
        assert!(m
            .lane_line_distances(&MapPoint::new(30.0, 9.0), Heading::new(0.0))
            .is_none());
        assert!(m
            .lane_line_distances(&MapPoint::new(30.0, 1.75), Heading::new(1.5))
            .is_none());
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let m = two_lane_map();
        let text = m.to_toml_string().unwrap();
        assert_eq!(DigitalMap::from_toml_str(&text).unwrap(), m);

        let mut bad = m.clone();
        bad.lanes[0].width = 1.5;
        assert!(bad.validate().is_err());
        assert!(DigitalMap::from_toml_str("[[building]]\npolygon = [[0.0, 0.0]]\n").is_err());
    }

    #[test]
    fn lane_assignment_text_form() {
        for a in [
            LaneAssignment::Lane(7),
            LaneAssignment::Intersection,
            LaneAssignment::OffRoad,
        ] {
            assert_eq!(a.to_string().parse::<LaneAssignment>().unwrap(), a);
        }
    }
}
