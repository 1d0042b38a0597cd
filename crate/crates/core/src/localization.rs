//! Particle-filter ego localization fusing INS, GNSS and lane-line distances.
//!
//! Each particle is a 2D map position. INS speed and heading drive the
//! prediction; the update multiplies each particle's weight by
//!
//! ```text
//! (gamma * w_gnss_lateral + (1 - gamma) * w_lane) * w_gnss_longitudinal
//! ```
//!
//! where every factor is an unnormalized Gaussian kernel of the residual
//! between what the particle implies and what was observed.

use rand::Rng;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{Heading, MapPoint};
use crate::map::DigitalMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("particle lies outside every lane corridor")]
    OffRoad,
    #[error("particle weights collapsed (total {0:e})")]
    DegenerateWeights(f64),
    #[error("invalid localization parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: MapPoint,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsReading {
    pub speed: f64,
    pub heading: Heading,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssReading {
    pub position: MapPoint,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneObservation {
    pub dist_left: f64,
    pub dist_right: f64,
    pub valid: bool,
}

impl LaneObservation {
    pub fn invalid() -> Self {
        Self {
            dist_left: 0.0,
            dist_right: 0.0,
            valid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationParams {
    pub n_particles: usize,
    pub sigma_lane: f64,
    pub sigma_gnss: f64,
    /// Credibility of the GNSS lateral component against the lane observation.
    pub gamma: f64,
    /// Per-step (along-track, cross-track) propagation noise in meters.
    pub propagation_noise: (f64, f64),
    /// Spread of the initial particle cloud around the first GNSS fix.
    pub init_sigma: f64,
    /// When off, lane observations are ignored.
    pub lane_weighting: bool,
}

impl Default for LocalizationParams {
    fn default() -> Self {
        Self {
            n_particles: 500,
            sigma_lane: 0.2,
            sigma_gnss: 3.0,
            gamma: 0.3,
            propagation_noise: (0.2, 0.1),
            init_sigma: 5.0,
            lane_weighting: true,
        }
    }
}

impl LocalizationParams {
    pub fn validate(&self) -> Result<(), LocalizationError> {
        let bad = |m: &str| Err(LocalizationError::InvalidParams(m.to_string()));
        if self.n_particles == 0 {
            return bad("n_particles must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.sigma_lane > 0.0 && self.sigma_gnss > 0.0) {
            return bad("sigmas must be positive");
        }
        if self.propagation_noise.0 < 0.0 || self.propagation_noise.1 < 0.0 || self.init_sigma < 0.0
        {
            return bad("noise levels must be non-negative");
        }
        Ok(())
    }
}

fn kernel(residual: f64, sigma: f64) -> f64 {
    (-0.5 * (residual / sigma).powi(2)).exp()
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Particles drawn around `center` with isotropic spread `sigma`, equal weights.
pub fn initialize<R: Rng + ?Sized>(
    center: MapPoint,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Vec<Particle> {
    let w = 1.0 / n as f64;
    (0..n)
        .map(|_| Particle {
            state: MapPoint::new(
                center.north + gauss(rng, sigma),
                center.east + gauss(rng, sigma),
            ),
            weight: w,
        })
        .collect()
}

/// Moves every particle `dt * speed` along the INS heading, plus
/// along/cross-track Gaussian noise. Weights are untouched.
pub fn propagate<R: Rng + ?Sized>(
    particles: &mut [Particle],
    ins: &InsReading,
    dt: f64,
    params: &LocalizationParams,
    rng: &mut R,
) {
    let fwd = ins.heading.forward();
    let right = ins.heading.right();
    let step = dt * ins.speed;
    let (s_along, s_cross) = params.propagation_noise;
    for p in particles.iter_mut() {
        let along = step + gauss(rng, s_along);
        let cross = gauss(rng, s_cross);
        p.state = p.state.add(&fwd.scale(along)).add(&right.scale(cross));
    }
}

/// Lane-line likelihood factor of one particle: product of Gaussian kernels
/// of the left and right residuals between map-implied and observed distances.
pub fn weigh_lane(
    p: &Particle,
    obs: &LaneObservation,
    map: &DigitalMap,
    theta: Heading,
    sigma_lane: f64,
) -> Result<f64, LocalizationError> {
    let (left, right) = map
        .lane_line_distances(&p.state, theta)
        .ok_or(LocalizationError::OffRoad)?;
    Ok(kernel(left - obs.dist_left, sigma_lane) * kernel(right - obs.dist_right, sigma_lane))
}

/// Splits the particle-to-fix residual into the components across and along
/// `theta` and scores each. Returns `(w_lateral, w_longitudinal)`.
pub fn weigh_gnss(p: &Particle, gnss: &GnssReading, theta: Heading, sigma_gnss: f64) -> (f64, f64) {
    let (lat, lon) = gnss_residual(p, gnss, theta);
    (kernel(lat, sigma_gnss), kernel(lon, sigma_gnss))
}

/// `(lateral, longitudinal)` components of `gnss - particle` w.r.t. `theta`.
pub fn gnss_residual(p: &Particle, gnss: &GnssReading, theta: Heading) -> (f64, f64) {
    let r = gnss.position.sub(&p.state);
    (r.dot(&theta.right()), r.dot(&theta.forward()))
}

pub fn joint_weight(w_gnss_lat: f64, w_lane: f64, w_gnss_lon: f64, gamma: f64) -> f64 {
    (gamma * w_gnss_lat + (1.0 - gamma) * w_lane) * w_gnss_lon
}

fn total_weight(particles: &[Particle]) -> f64 {
    particles.iter().map(|p| p.weight).sum()
}

/// Weighted mean of the particle states.
pub fn estimate(particles: &[Particle]) -> Result<MapPoint, LocalizationError> {
    let total = total_weight(particles);
    if !(total > f64::MIN_POSITIVE) || !total.is_finite() {
        return Err(LocalizationError::DegenerateWeights(total));
    }
    let (n, e) = particles.iter().fold((0.0, 0.0), |(n, e), p| {
        (n + p.weight * p.state.north, e + p.weight * p.state.east)
    });
    Ok(MapPoint::new(n / total, e / total))
}

pub fn normalize(particles: &mut [Particle]) -> Result<(), LocalizationError> {
    let total = total_weight(particles);
    if !(total > f64::MIN_POSITIVE) || !total.is_finite() {
        return Err(LocalizationError::DegenerateWeights(total));
    }
    for p in particles.iter_mut() {
        p.weight /= total;
    }
    Ok(())
}

/// `1 / sum(w^2)` of normalized weights.
pub fn effective_sample_size(particles: &[Particle]) -> f64 {
    let total = total_weight(particles);
    1.0 / particles
        .iter()
        .map(|p| (p.weight / total).powi(2))
        .sum::<f64>()
}

/// Systematic resampling with an explicit offset `u0` in `[0, 1/n)`.
pub fn systematic_resample(particles: &[Particle], u0: f64) -> Vec<Particle> {
    let n = particles.len();
    if n == 0 {
        return Vec::new();
    }
    let total = total_weight(particles);
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = particles[0].weight / total;
    let mut j = 0;
    for i in 0..n {
        let u = u0 + i as f64 * step;
        while u >= cumulative && j + 1 < n {
            j += 1;
            cumulative += particles[j].weight / total;
        }
        out.push(Particle {
            state: particles[j].state,
            weight: step,
        });
    }
    out
}

/// Systematic resampling with a random offset.
pub fn resample<R: Rng + ?Sized>(particles: &[Particle], rng: &mut R) -> Vec<Particle> {
    let u0 = rng.random::<f64>() / particles.len().max(1) as f64;
    systematic_resample(particles, u0)
}

/// One predict/update cycle. Returns the weighted-mean estimate; resamples
/// when the effective sample size drops below half the particle count.
#[allow(clippy::too_many_arguments)]
pub fn localization_step<R: Rng + ?Sized>(
    particles: &mut Vec<Particle>,
    ins: &InsReading,
    gnss: &GnssReading,
    lane_obs: &LaneObservation,
    theta: Heading,
    map: &DigitalMap,
    params: &LocalizationParams,
    dt: f64,
    rng: &mut R,
) -> Result<MapPoint, LocalizationError> {
    propagate(particles, ins, dt, params, rng);
    let use_lane = lane_obs.valid && params.lane_weighting;
    for p in particles.iter_mut() {
        let (w_lat, w_lon) = weigh_gnss(p, gnss, theta, params.sigma_gnss);
        let likelihood = if use_lane {
            match weigh_lane(p, lane_obs, map, theta, params.sigma_lane) {
                Ok(w_lane) => joint_weight(w_lat, w_lane, w_lon, params.gamma),
                Err(_) => 0.0,
            }
        } else {
            joint_weight(w_lat, 0.0, w_lon, 1.0)
        };
        p.weight *= likelihood;
    }
    normalize(particles)?;
    let est = estimate(particles)?;
    if effective_sample_size(particles) < particles.len() as f64 / 2.0 {
        *particles = resample(particles, rng);
    }
    Ok(est)
}

/// Owns the particle set and its random stream; restarts from GNSS when the
/// weights collapse.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    pub params: LocalizationParams,
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
}

impl ParticleFilter {
    pub fn new(params: LocalizationParams, seed: u64) -> Result<Self, LocalizationError> {
        params.validate()?;
        Ok(Self {
            params,
            particles: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn is_initialized(&self) -> bool {
        !self.particles.is_empty()
    }

    pub fn reset(&mut self, center: MapPoint) {
        self.particles = initialize(
            center,
            self.params.init_sigma,
            self.params.n_particles,
            &mut self.rng,
        );
    }

    /// Runs one cycle. The first call only seeds the cloud at the GNSS fix.
    pub fn step(
        &mut self,
        ins: &InsReading,
        gnss: &GnssReading,
        lane_obs: &LaneObservation,
        theta: Heading,
        map: &DigitalMap,
        dt: f64,
    ) -> MapPoint {
        if !self.is_initialized() {
            self.reset(gnss.position);
            return estimate(&self.particles).unwrap_or(gnss.position);
        }
        match localization_step(
            &mut self.particles,
            ins,
            gnss,
            lane_obs,
            theta,
            map,
            &self.params,
            dt,
            &mut self.rng,
        ) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("particle filter reset at t={:.3}: {e}", gnss.timestamp);
                self.reset(gnss.position);
                gnss.position
            }
        }
    }
}
