use super::{ScenarioConfig, ScenarioError};
use crate::frames::MapPoint;
use crate::geom::rectangle;
use crate::map::{DigitalMap, Lane};

/// Two perpendicular two-by-two-lane roads crossing at the origin, with a
/// building block in each corner. Right-hand traffic; lane ids:
/// 1/2 northbound (inner/outer), 3/4 southbound, 5/6 eastbound, 7/8 westbound.
pub fn build_intersection(cfg: &ScenarioConfig) -> Result<DigitalMap, ScenarioError> {
    cfg.validate()?;
    let lay = &cfg.layout;
    let l = lay.half_length;
    let w = lay.lane_width;
    let inner = w / 2.0;
    let outer = 1.5 * w;
    let ns = |id, east: f64, north_bound: bool| Lane {
        id,
        centerline: if north_bound {
            vec![MapPoint::new(-l, east), MapPoint::new(l, east)]
        } else {
            vec![MapPoint::new(l, east), MapPoint::new(-l, east)]
        },
        width: w,
    };
    let ew = |id, north: f64, east_bound: bool| Lane {
        id,
        centerline: if east_bound {
            vec![MapPoint::new(north, -l), MapPoint::new(north, l)]
        } else {
            vec![MapPoint::new(north, l), MapPoint::new(north, -l)]
        },
        width: w,
    };
    let lanes = vec![
        ns(1, inner, true),
        ns(2, outer, true),
        ns(3, -inner, false),
        ns(4, -outer, false),
        ew(5, -inner, true),
        ew(6, -outer, true),
        ew(7, inner, false),
        ew(8, outer, false),
    ];
    let r = lay.road_half_width();
    let f = lay.facade_offset();
    let buildings = vec![
        rectangle(f, l, f, l),
        rectangle(f, l, -l, -f),
        rectangle(-l, -f, -l, -f),
        rectangle(-l, -f, f, l),
    ];
    let map = DigitalMap {
        buildings,
        lanes,
        intersection: rectangle(-r, r, -r, r),
    };
    map.validate()
        .map_err(|e| ScenarioError::InvalidConfig(e.to_string()))?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{point_in_polygon, polygons_intersect};

    #[test]
    fn default_layout_counts() {
        let map = build_intersection(&ScenarioConfig::default()).unwrap();
        assert_eq!(map.buildings.len(), 4);
        assert_eq!(map.lanes.len(), 8);
        assert_eq!(map.intersection.len(), 4);
    }

    #[test]
    fn centerlines_follow_their_road_axis() {
        let map = build_intersection(&ScenarioConfig::default()).unwrap();
        for lane in &map.lanes {
            let (a, b) = (lane.centerline[0], lane.centerline[1]);
            let along_ns = (a.east - b.east).abs() < 1e-9;
            let along_ew = (a.north - b.north).abs() < 1e-9;
            assert!(along_ns ^ along_ew, "lane {} is not axis aligned", lane.id);
        }
    }

    #[test]
    fn buildings_stay_clear_of_lane_corridors() {
        let map = build_intersection(&ScenarioConfig::default()).unwrap();
        for lane in &map.lanes {
            let (a, b) = (lane.centerline[0], lane.centerline[1]);
            let h = lane.width / 2.0;
            let corridor = if (a.east - b.east).abs() < 1e-9 {
                rectangle(
                    a.north.min(b.north),
                    a.north.max(b.north),
                    a.east - h,
                    a.east + h,
                )
            } else {
                rectangle(
                    a.north - h,
                    a.north + h,
                    a.east.min(b.east),
                    a.east.max(b.east),
                )
            };
            for bld in &map.buildings {
                assert!(!polygons_intersect(&corridor, bld));
                assert!(!point_in_polygon(&bld[0], &corridor));
            }
        }
    }
}
