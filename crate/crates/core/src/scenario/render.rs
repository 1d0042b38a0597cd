//! Column-wise ray casting of extruded 2D footprints.
//!
//! Every body is a vertical prism over a footprint polygon, spanning
//! heights `[0, top]` above the ground. For each image column the ground
//! ray is intersected with every footprint; the nearest face of each body
//! covers a row interval, and nearer bodies claim rows first. Rows nobody
//! claims are ground below the horizon and sky above it.

use crate::frames::{rotate2d, CameraIntrinsics, EgoPose, MapPoint};
use crate::geom::{polygon_edges, ray_segment_intersection};
use crate::raster::{DisparityImage, LabelImage, PixelClass};

/// Faces closer than this are ignored (m).
const MIN_HIT_DEPTH: f64 = 0.1;

pub const NO_INSTANCE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub footprint: Vec<MapPoint>,
    pub top: f64,
    pub class: PixelClass,
    /// Caller-defined id written to the instance raster.
    pub instance: u32,
}

/// Per-body pixel bookkeeping of one rendered frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyCoverage {
    /// Pixels the body would cover with nothing in front of it.
    pub unoccluded_pixels: usize,
    /// Pixels it actually owns.
    pub visible_pixels: usize,
    /// Columns in which it owns at least one pixel.
    pub visible_columns: usize,
    /// Its unoccluded silhouette reaches the left or right image border.
    pub touches_border: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub disparity: DisparityImage,
    pub labels: LabelImage,
    pub instances: Vec<u32>,
    pub coverage: Vec<BodyCoverage>,
}

impl Rendering {
    pub fn instance(&self, u: u32, v: u32) -> u32 {
        self.instances[(v * self.labels.width + u) as usize]
    }
}

/// Renders `bodies` seen from a camera at `pose`, `camera_height` above the
/// ground. Disparity is noiseless.
pub fn render(
    cam: &CameraIntrinsics,
    camera_height: f64,
    pose: &EgoPose,
    bodies: &[Body],
) -> Rendering {
    let (w, h) = (cam.width, cam.height);
    let mut disparity = DisparityImage::new(w, h);
    let mut labels = LabelImage::new(w, h);
    let mut instances = vec![NO_INSTANCE; (w * h) as usize];
    let mut coverage = vec![BodyCoverage::default(); bodies.len()];
    let bf = cam.bf();
    let mut hits: Vec<(f64, usize)> = Vec::with_capacity(bodies.len());
    let mut filled = vec![false; h as usize];

    for u in 0..w {
        let lateral = (u as f64 - cam.c_u) / cam.f_u;
        let dir = rotate2d(pose.theta, MapPoint::new(1.0, lateral));
        hits.clear();
        for (i, b) in bodies.iter().enumerate() {
            let nearest = polygon_edges(&b.footprint)
                .filter_map(|(a, e)| ray_segment_intersection(&pose.position, &dir, &a, &e))
                .filter(|t| *t > MIN_HIT_DEPTH)
                .min_by(f64::total_cmp);
            if let Some(t) = nearest {
                hits.push((t, i));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        filled.fill(false);
        for &(n, i) in &hits {
            let body = &bodies[i];
            let v_top = cam.c_v + (camera_height - body.top) * cam.f_u / n;
            let v_bottom = cam.c_v + camera_height * cam.f_u / n;
            let first = v_top.ceil().max(0.0);
            let last = v_bottom.floor().min(h as f64 - 1.0);
            if first > last {
                continue;
            }
            let cov = &mut coverage[i];
            cov.unoccluded_pixels += (last - first) as usize + 1;
            if u == 0 || u == w - 1 {
                cov.touches_border = true;
            }
            let mut owned_here = false;
            for v in first as u32..=last as u32 {
                if filled[v as usize] {
                    continue;
                }
                filled[v as usize] = true;
                owned_here = true;
                cov.visible_pixels += 1;
                disparity.set(u, v, (bf / n) as f32);
                labels.set(u, v, body.class);
                instances[(v * w + u) as usize] = body.instance;
            }
            if owned_here {
                cov.visible_columns += 1;
            }
        }
        for v in 0..h {
            if filled[v as usize] {
                continue;
            }
            let below = v as f64 - cam.c_v;
            if below > 0.0 {
                let n = camera_height * cam.f_u / below;
                disparity.set(u, v, (bf / n) as f32);
                labels.set(u, v, PixelClass::Ground);
            }
        }
    }
    Rendering {
        disparity,
        labels,
        instances,
        coverage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Heading;
    use crate::geom::rectangle;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 0.4, 32.0, 24.0, 64, 48).unwrap()
    }

    fn wall(north: f64, top: f64, class: PixelClass, instance: u32) -> Body {
        Body {
            footprint: rectangle(north, north + 1.0, -50.0, 50.0),
            top,
            class,
            instance,
        }
    }

    #[test]
    fn rendered_disparity_matches_depth() {
        let pose = EgoPose::new(MapPoint::new(0.0, 0.0), Heading::new(0.0), 0.0);
        let r = render(
            &cam(),
            1.5,
            &pose,
            &[wall(20.0, 10.0, PixelClass::Building, 7)],
        );
        let d = r.disparity.get(32, 24);
        assert!((d as f64 - 0.4 * 100.0 / 20.0).abs() < 1e-5);
        assert_eq!(r.labels.get(32, 24), PixelClass::Building);
        assert_eq!(r.instance(32, 24), 7);
        // bottom edge of the wall sits at v = c_v + h f / n = 31.5
        assert_eq!(r.labels.get(10, 31), PixelClass::Building);
        assert_eq!(r.labels.get(10, 32), PixelClass::Ground);
        assert_eq!(r.labels.get(10, 0), PixelClass::Building);
    }

    #[test]
    fn nearer_surface_wins() {
        let pose = EgoPose::new(MapPoint::new(0.0, 0.0), Heading::new(0.0), 0.0);
        let bodies = [
            wall(20.0, 10.0, PixelClass::Building, 1),
            Body {
                footprint: rectangle(10.0, 12.0, -1.0, 1.0),
                top: 1.5,
                class: PixelClass::Vehicle,
                instance: 2,
            },
        ];
        let r = render(&cam(), 1.5, &pose, &bodies);
        assert_eq!(r.labels.get(32, 30), PixelClass::Vehicle);
        assert!((r.disparity.get(32, 30) as f64 - 4.0).abs() < 1e-5);
        // above the car top (camera height) the wall is visible again
        assert_eq!(r.labels.get(32, 20), PixelClass::Building);
        assert!(r.coverage[0].visible_pixels < r.coverage[0].unoccluded_pixels);
        assert_eq!(
            r.coverage[1].visible_pixels,
            r.coverage[1].unoccluded_pixels
        );
        assert!(r.coverage[0].touches_border && !r.coverage[1].touches_border);
    }

    #[test]
    fn empty_scene_is_ground_and_sky() {
        let pose = EgoPose::default();
        let r = render(&cam(), 1.5, &pose, &[]);
        assert_eq!(r.labels.get(5, 5), PixelClass::Sky);
        assert_eq!(r.disparity.get(5, 5), 0.0);
        assert_eq!(r.labels.get(5, 40), PixelClass::Ground);
        let n = 1.5 * 100.0 / (40.0 - 24.0);
        assert!((r.disparity.get(5, 40) as f64 - 40.0 / n).abs() < 1e-5);
    }

    #[test]
    fn heading_rotates_the_view() {
        let east_wall = Body {
            footprint: rectangle(-50.0, 50.0, 20.0, 21.0),
            top: 10.0,
            class: PixelClass::Building,
            instance: 1,
        };
        let facing_east = EgoPose::new(MapPoint::new(0.0, 0.0), Heading::from_degrees(90.0), 0.0);
        let r = render(&cam(), 1.5, &facing_east, std::slice::from_ref(&east_wall));
        assert!((r.disparity.get(32, 24) as f64 - 2.0).abs() < 1e-5);
        let facing_north = EgoPose::default();
        let r = render(&cam(), 1.5, &facing_north, &[east_wall]);
        assert_eq!(r.labels.get(32, 20), PixelClass::Sky);
    }
}
