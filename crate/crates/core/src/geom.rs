//! Small planar geometry helpers over [`MapPoint`] coordinates.

use crate::frames::MapPoint;

/// Closest point on a polyline to `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    pub distance: f64,
    pub closest: MapPoint,
    /// Unit direction of the segment holding the closest point.
    pub tangent: MapPoint,
    /// Whether the foot of the perpendicular falls strictly inside the
    /// polyline (not clamped to one of its two ends).
    pub interior: bool,
}

/// Projects `p` onto segment `a`-`b`, returning the clamped parameter in `[0, 1]`.
pub fn segment_param(p: &MapPoint, a: &MapPoint, b: &MapPoint) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return 0.0;
    }
    (p.sub(a).dot(&ab) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: &MapPoint, a: &MapPoint, b: &MapPoint) -> f64 {
    let t = segment_param(p, a, b);
    p.distance(&a.add(&b.sub(a).scale(t)))
}

pub fn project_on_polyline(p: &MapPoint, line: &[MapPoint]) -> Option<PolylineProjection> {
    let mut best: Option<(PolylineProjection, f64)> = None;
    let n = line.len();
    for (i, w) in line.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let ab = b.sub(a);
        let len = ab.norm();
        if len == 0.0 {
            continue;
        }
        let t_raw = p.sub(a).dot(&ab) / (len * len);
        let t = t_raw.clamp(0.0, 1.0);
        let closest = a.add(&ab.scale(t));
        let dist = p.distance(&closest);
        let clamped_at_start = i == 0 && t_raw < 0.0;
        let clamped_at_end = i + 2 == n && t_raw > 1.0;
        let proj = PolylineProjection {
            distance: dist,
            closest,
            tangent: ab.scale(1.0 / len),
            interior: !(clamped_at_start || clamped_at_end),
        };
        if best.as_ref().is_none_or(|(_, d)| dist < *d) {
            best = Some((proj, dist));
        }
    }
    best.map(|(p, _)| p)
}

/// Even-odd point-in-polygon test. The polygon is implicitly closed.
pub fn point_in_polygon(p: &MapPoint, poly: &[MapPoint]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (&poly[i], &poly[j]);
        if (pi.east > p.east) != (pj.east > p.east) {
            let n_cross =
                pj.north + (p.east - pj.east) / (pi.east - pj.east) * (pi.north - pj.north);
            if p.north < n_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Iterates over the closed edges of a polygon.
pub fn polygon_edges(poly: &[MapPoint]) -> impl Iterator<Item = (MapPoint, MapPoint)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (poly[i], poly[(i + 1) % n]))
}

/// Distance along the ray `origin + t * dir` (t >= 0) to segment `a`-`b`, if hit.
/// `dir` need not be normalized; `t` is expressed in units of `dir`.
pub fn ray_segment_intersection(
    origin: &MapPoint,
    dir: &MapPoint,
    a: &MapPoint,
    b: &MapPoint,
) -> Option<f64> {
    let e = b.sub(a);
    let denom = cross(dir, &e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a.sub(origin);
    let t = cross(&ao, &e) / denom;
    let s = cross(&ao, dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

fn cross(a: &MapPoint, b: &MapPoint) -> f64 {
    a.north * b.east - a.east * b.north
}

fn orient(a: &MapPoint, b: &MapPoint, c: &MapPoint) -> f64 {
    cross(&b.sub(a), &c.sub(a))
}

/// Proper or touching intersection between two closed segments.
pub fn segments_intersect(a: &MapPoint, b: &MapPoint, c: &MapPoint, d: &MapPoint) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: &MapPoint, q: &MapPoint, r: &MapPoint, o: f64| {
        o == 0.0
            && r.north >= p.north.min(q.north)
            && r.north <= p.north.max(q.north)
            && r.east >= p.east.min(q.east)
            && r.east <= p.east.max(q.east)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// True when two simple polygons overlap (share area or touch).
pub fn polygons_intersect(p: &[MapPoint], q: &[MapPoint]) -> bool {
    for (a, b) in polygon_edges(p) {
        for (c, d) in polygon_edges(q) {
            if segments_intersect(&a, &b, &c, &d) {
                return true;
            }
        }
    }
    p.first().is_some_and(|v| point_in_polygon(v, q))
        || q.first().is_some_and(|v| point_in_polygon(v, p))
}

/// A polygon is simple when no two non-adjacent edges meet.
pub fn polygon_is_simple(poly: &[MapPoint]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let edges: Vec<_> = polygon_edges(poly).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(&edges[i].0, &edges[i].1, &edges[j].0, &edges[j].1) {
                return false;
            }
        }
    }
    true
}

/// Points along every polygon edge at (at most) `spacing` meters.
pub fn sample_polygon_edges(poly: &[MapPoint], spacing: f64) -> Vec<MapPoint> {
    let mut out = Vec::new();
    for (a, b) in polygon_edges(poly) {
        let len = a.distance(&b);
        let steps = (len / spacing).ceil().max(1.0) as usize;
        for k in 0..steps {
            let t = k as f64 / steps as f64;
            out.push(a.add(&b.sub(&a).scale(t)));
        }
    }
    out
}

/// Axis-aligned rectangle as a counter-clockwise polygon.
pub fn rectangle(north_min: f64, north_max: f64, east_min: f64, east_max: f64) -> Vec<MapPoint> {
    vec![
        MapPoint::new(north_min, east_min),
        MapPoint::new(north_min, east_max),
        MapPoint::new(north_max, east_max),
        MapPoint::new(north_max, east_min),
    ]
}
