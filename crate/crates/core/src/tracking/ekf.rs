//! Constant-velocity prediction and pinhole-measurement EKF update.

use nalgebra::{Matrix2, Vector2};

use super::{Track, TrackingError};
use crate::frames::{CameraIntrinsics, EPSILON_DEPTH};

/// Linear-Gaussian motion model with velocity as a control input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub dt: f64,
    /// Process noise (m²).
    pub q: Matrix2<f64>,
    /// Measurement noise on `(u, d)` (px²).
    pub r: Matrix2<f64>,
}

impl MotionModel {
    pub fn new(dt: f64, q: Matrix2<f64>, r: Matrix2<f64>) -> Self {
        Self { dt, q, r }
    }

    pub fn diagonal(dt: f64, q: (f64, f64), r: (f64, f64)) -> Self {
        Self {
            dt,
            q: Matrix2::new(q.0, 0.0, 0.0, q.1),
            r: Matrix2::new(r.0, 0.0, 0.0, r.1),
        }
    }
}

/// `h(X') = (c_u + f_u * east / north, b' * f_u / north)`.
pub fn measurement(x: &Vector2<f64>, cam: &CameraIntrinsics) -> Vector2<f64> {
    Vector2::new(cam.c_u + cam.f_u * x[1] / x[0], cam.bf() / x[0])
}

/// Jacobian of [`measurement`] with respect to `(north, east)`.
pub fn measurement_jacobian(x: &Vector2<f64>, cam: &CameraIntrinsics) -> Matrix2<f64> {
    let (n, e) = (x[0], x[1]);
    Matrix2::new(
        -cam.f_u * e / (n * n),
        cam.f_u / n,
        -cam.bf() / (n * n),
        0.0,
    )
}

/// Jacobian of the inverse projection `(u, d) -> (north, east)`.
pub fn unprojection_jacobian(u: f64, d: f64, cam: &CameraIntrinsics) -> Matrix2<f64> {
    let b = cam.b_prime;
    Matrix2::new(
        0.0,
        -cam.bf() / (d * d),
        b / d,
        -(u - cam.c_u) * b / (d * d),
    )
}

pub(crate) fn symmetrize(p: &Matrix2<f64>) -> Matrix2<f64> {
    (p + p.transpose()) * 0.5
}

/// `X' <- X' + dt * v`, `P <- P + Q`.
pub fn predict(track: &Track, model: &MotionModel) -> Track {
    let mut out = track.clone();
    out.state += track.velocity * model.dt;
    out.covariance = symmetrize(&(track.covariance + model.q));
    out
}

/// EKF correction with measurement `z = (u_center, d_center)`, Joseph form.
/// The velocity input is not touched here; see [`Track::record_state`].
pub fn ekf_update(
    track: &Track,
    z: Vector2<f64>,
    cam: &CameraIntrinsics,
    model: &MotionModel,
) -> Result<Track, TrackingError> {
    if !(track.state[0] > EPSILON_DEPTH) {
        return Err(TrackingError::BehindCamera(track.state[0]));
    }
    let h = measurement_jacobian(&track.state, cam);
    let p = track.covariance;
    let s = h * p * h.transpose() + model.r;
    let s_inv = s
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(TrackingError::SingularInnovation)?;
    let k = p * h.transpose() * s_inv;
    let innovation = z - measurement(&track.state, cam);
    let i_kh = Matrix2::identity() - k * h;
    let mut out = track.clone();
    out.state = track.state + k * innovation;
    out.covariance = symmetrize(&(i_kh * p * i_kh.transpose() + k * model.r * k.transpose()));
    Ok(out)
}
