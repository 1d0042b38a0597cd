//! Coordinate frames shared by every stage of the pipeline.
//!
//! * image: `(u, v)` pixels, `v` growing downward, plus disparity `d`.
//! * camera: `(north, east)` meters, i.e. (forward, right) of the camera.
//! * map: `(north, east)` meters in the digital map's local ENU plane.
//!
//! Headings are measured clockwise from map north, so a camera point
//! `(forward, right)` lands in the map through the usual 2D rotation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest forward distance (m) that may be projected.
pub const EPSILON_DEPTH: f64 = 0.5;
/// Smallest disparity (px) that may be unprojected.
pub const MIN_DISPARITY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("point depth {0} m is below the projection limit")]
    DepthTooSmall(f64),
    #[error("disparity {0} px is below the unprojection limit")]
    DisparityTooSmall(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Rectified stereo pinhole camera. Square pixels are assumed, so the
/// vertical focal length equals `f_u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub f_u: f64,
    pub b_prime: f64,
    pub c_u: f64,
    pub c_v: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        f_u: f64,
        b_prime: f64,
        c_u: f64,
        c_v: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, FrameError> {
        let cam = Self {
            f_u,
            b_prime,
            c_u,
            c_v,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if !(self.f_u > 0.0) {
            return Err(FrameError::InvalidIntrinsics(format!("f_u = {}", self.f_u)));
        }
        if !(self.b_prime > 0.0) {
            return Err(FrameError::InvalidIntrinsics(format!(
                "b_prime = {}",
                self.b_prime
            )));
        }
        if !(0.0..self.width as f64).contains(&self.c_u) {
            return Err(FrameError::InvalidIntrinsics(format!("c_u = {}", self.c_u)));
        }
        if !(0.0..self.height as f64).contains(&self.c_v) {
            return Err(FrameError::InvalidIntrinsics(format!("c_v = {}", self.c_v)));
        }
        Ok(())
    }

    /// The rig used on the reference vehicle: 1024x768 at f = 1000 px, 0.4 m baseline.
    pub fn full_resolution() -> Self {
        Self {
            f_u: 1000.0,
            b_prime: 0.4,
            c_u: 512.0,
            c_v: 384.0,
            width: 1024,
            height: 768,
        }
    }

    /// Quarter-scale variant of [`full_resolution`](Self::full_resolution), same field of view.
    pub fn fast() -> Self {
        Self {
            f_u: 250.0,
            b_prime: 0.4,
            c_u: 128.0,
            c_v: 96.0,
            width: 256,
            height: 192,
        }
    }

    /// `b' * f_u`, the disparity-depth product.
    pub fn bf(&self) -> f64 {
        self.b_prime * self.f_u
    }
}

/// Point in the camera ground plane: meters forward and right of the camera.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CameraPoint {
    pub north: f64,
    pub east: f64,
}

impl CameraPoint {
    pub fn new(north: f64, east: f64) -> Self {
        Self { north, east }
    }

    pub fn range(&self) -> f64 {
        self.north.hypot(self.east)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MapPoint {
    pub north: f64,
    pub east: f64,
}

impl MapPoint {
    pub fn new(north: f64, east: f64) -> Self {
        Self { north, east }
    }

    pub fn distance(&self, other: &MapPoint) -> f64 {
        (self.north - other.north).hypot(self.east - other.east)
    }

    pub fn sub(&self, other: &MapPoint) -> MapPoint {
        MapPoint::new(self.north - other.north, self.east - other.east)
    }

    pub fn add(&self, other: &MapPoint) -> MapPoint {
        MapPoint::new(self.north + other.north, self.east + other.east)
    }

    pub fn scale(&self, k: f64) -> MapPoint {
        MapPoint::new(self.north * k, self.east * k)
    }

    pub fn norm(&self) -> f64 {
        self.north.hypot(self.east)
    }

    pub fn dot(&self, other: &MapPoint) -> f64 {
        self.north * other.north + self.east * other.east
    }
}

/// Wraps any angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

/// Ego heading in radians, clockwise from map north, always in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Heading(f64);

impl Heading {
    pub fn new(theta: f64) -> Self {
        Heading(normalize_angle(theta))
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Unit vector pointing along the heading, in map coordinates.
    pub fn forward(self) -> MapPoint {
        MapPoint::new(self.0.cos(), self.0.sin())
    }

    /// Unit vector pointing to the right of the heading, in map coordinates.
    pub fn right(self) -> MapPoint {
        MapPoint::new(-self.0.sin(), self.0.cos())
    }

    /// Signed smallest difference `self - other`, in `(-pi, pi]`.
    pub fn diff(self, other: Heading) -> f64 {
        normalize_angle(self.0 - other.0)
    }

    pub fn offset(self, delta: f64) -> Heading {
        Heading::new(self.0 + delta)
    }
}

impl From<f64> for Heading {
    fn from(v: f64) -> Self {
        Heading::new(v)
    }
}

impl From<Heading> for f64 {
    fn from(h: Heading) -> f64 {
        h.0
    }
}

/// Fused ego pose: particle-filter position plus (possibly map-corrected) heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoPose {
    pub position: MapPoint,
    pub theta: Heading,
    pub timestamp: f64,
}

impl EgoPose {
    pub fn new(position: MapPoint, theta: Heading, timestamp: f64) -> Self {
        Self {
            position,
            theta,
            timestamp,
        }
    }
}

/// Pinhole projection of a ground-plane camera point to `(u, d)`.
pub fn project(p: CameraPoint, cam: &CameraIntrinsics) -> Result<(f64, f64), FrameError> {
    if !(p.north > EPSILON_DEPTH) {
        return Err(FrameError::DepthTooSmall(p.north));
    }
    let u = cam.c_u + cam.f_u * p.east / p.north;
    let d = cam.bf() / p.north;
    Ok((u, d))
}

/// Inverse of [`project`].
pub fn unproject(u: f64, d: f64, cam: &CameraIntrinsics) -> Result<CameraPoint, FrameError> {
    if !(d > MIN_DISPARITY) {
        return Err(FrameError::DisparityTooSmall(d));
    }
    let north = cam.bf() / d;
    let east = (u - cam.c_u) * north / cam.f_u;
    Ok(CameraPoint { north, east })
}

/// 2D rotation of `(north, east)` by `theta`:
/// `[m_n; m_e] = [[cos, -sin], [sin, cos]] [b_n; b_e]`.
pub fn rotate2d(theta: Heading, p: MapPoint) -> MapPoint {
    let (s, c) = theta.radians().sin_cos();
    MapPoint::new(c * p.north - s * p.east, s * p.north + c * p.east)
}

/// Registers a camera-frame point on the map using the ego pose.
pub fn camera_to_map(p: CameraPoint, pose: &EgoPose) -> MapPoint {
    rotate2d(pose.theta, MapPoint::new(p.north, p.east)).add(&pose.position)
}

/// Inverse of [`camera_to_map`].
pub fn map_to_camera(m: MapPoint, pose: &EgoPose) -> CameraPoint {
    let rel = rotate2d(Heading::new(-pose.theta.radians()), m.sub(&pose.position));
    CameraPoint::new(rel.north, rel.east)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam0() -> CameraIntrinsics {
        CameraIntrinsics {
            f_u: 1000.0,
            b_prime: 0.4,
            c_u: 0.0,
            c_v: 0.0,
            width: 1024,
            height: 768,
        }
    }

    #[test]
    fn project_examples() {
        let (u, d) = project(CameraPoint::new(20.0, 2.0), &cam0()).unwrap();
        assert!((u - 100.0).abs() < 1e-12 && (d - 20.0).abs() < 1e-12);

        let cam = CameraIntrinsics {
            c_u: 512.0,
            ..cam0()
        };
        let (u, d) = project(CameraPoint::new(5.0, 0.0), &cam).unwrap();
        assert_eq!((u, d), (512.0, 80.0));

        let (_, d) = project(CameraPoint::new(4.0, 0.0), &cam0()).unwrap();
        assert!((d - 100.0).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_points_too_close() {
        assert!(matches!(
            project(CameraPoint::new(0.5, 1.0), &cam0()),
            Err(FrameError::DepthTooSmall(_))
        ));
        assert!(project(CameraPoint::new(-3.0, 1.0), &cam0()).is_err());
    }

    #[test]
    fn unproject_examples() {
        let p = unproject(100.0, 20.0, &cam0()).unwrap();
        assert!((p.north - 20.0).abs() < 1e-12 && (p.east - 2.0).abs() < 1e-12);
        let cam = CameraIntrinsics {
            c_u: 300.0,
            ..cam0()
        };
        assert_eq!(unproject(300.0, 7.3, &cam).unwrap().east, 0.0);
        assert!(matches!(
            unproject(10.0, 0.5, &cam0()),
            Err(FrameError::DisparityTooSmall(_))
        ));
    }

    #[test]
    fn camera_to_map_examples() {
        let at = |theta: f64, n: f64, e: f64| {
            EgoPose::new(MapPoint::new(n, e), Heading::new(theta), 0.0)
        };
        let m = camera_to_map(CameraPoint::new(10.0, 2.0), &at(0.0, 0.0, 0.0));
        assert_eq!(m, MapPoint::new(10.0, 2.0));

        let m = camera_to_map(CameraPoint::new(10.0, 2.0), &at(PI / 2.0, 0.0, 0.0));
        assert!((m.north + 2.0).abs() < 1e-12 && (m.east - 10.0).abs() < 1e-12);

        let m = camera_to_map(CameraPoint::new(10.0, 0.0), &at(PI, 5.0, 5.0));
        assert!((m.north + 5.0).abs() < 1e-12 && (m.east - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rotate2d_examples() {
        let p = MapPoint::new(3.0, -4.0);
        assert_eq!(rotate2d(Heading::new(0.0), p), p);
        let q = rotate2d(Heading::new(PI / 2.0), MapPoint::new(1.0, 0.0));
        assert!(q.north.abs() < 1e-15 && (q.east - 1.0).abs() < 1e-15);
        let t = Heading::new(0.7);
        let back = rotate2d(Heading::new(-0.7), rotate2d(t, p));
        assert!(back.distance(&p) < 1e-12);
    }

    #[test]
    fn heading_normalization() {
        assert_eq!(Heading::new(PI).radians(), PI);
        assert!((Heading::new(-PI).radians() - PI).abs() < 1e-15);
        assert!((Heading::new(3.0 * PI / 2.0).radians() + PI / 2.0).abs() < 1e-12);
        assert!((Heading::from_degrees(350.0).degrees() + 10.0).abs() < 1e-9);
        assert!((Heading::new(0.1).diff(Heading::new(-0.1)) - 0.2).abs() < 1e-15);
        assert!((Heading::new(3.1).diff(Heading::new(-3.1)) + (2.0 * PI - 6.2)).abs() < 1e-12);
    }

    #[test]
    fn map_to_camera_inverts_camera_to_map() {
        let pose = EgoPose::new(MapPoint::new(12.0, -3.0), Heading::new(2.1), 0.0);
        let p = CameraPoint::new(17.5, -4.25);
        let back = map_to_camera(camera_to_map(p, &pose), &pose);
        assert!((back.north - p.north).abs() < 1e-12 && (back.east - p.east).abs() < 1e-12);
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 0.4, 1.0, 1.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(100.0, -0.4, 1.0, 1.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(100.0, 0.4, 10.0, 1.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(100.0, 0.4, 5.0, 5.0, 10, 10).is_ok());
    }
}
