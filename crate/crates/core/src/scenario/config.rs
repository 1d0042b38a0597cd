use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{CameraIntrinsics, MapPoint};
use crate::stixel::SemanticClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
}

/// Piecewise-linear speed over time, `(t, speed)` knots with `t` ascending.
/// Speed is held constant outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeedProfile(pub Vec<[f64; 2]>);

impl SpeedProfile {
    pub fn constant(speed: f64) -> Self {
        SpeedProfile(vec![[0.0, speed]])
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let k = &self.0;
        if k.is_empty() {
            return 0.0;
        }
        if t <= k[0][0] {
            return k[0][1];
        }
        for w in k.windows(2) {
            let ([t0, v0], [t1, v1]) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1][1]
    }

    /// Distance covered between time 0 and `t` (exact for the linear pieces).
    pub fn distance_at(&self, t: f64) -> f64 {
        let k = &self.0;
        if k.is_empty() || t <= 0.0 {
            return 0.0;
        }
        let mut knots: Vec<[f64; 2]> = vec![[0.0, self.speed_at(0.0)]];
        knots.extend(k.iter().copied().filter(|kn| kn[0] > 0.0 && kn[0] < t));
        knots.push([t, self.speed_at(t)]);
        knots
            .windows(2)
            .map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]))
            .sum()
    }

    fn validate(&self, what: &str) -> Result<(), ScenarioError> {
        if self.0.is_empty() {
            return Err(ScenarioError::InvalidConfig(format!(
                "{what}: empty speed profile"
            )));
        }
        if self.0.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(ScenarioError::InvalidConfig(format!(
                "{what}: speed knots must have increasing times"
            )));
        }
        if self.0.iter().any(|k| k[1] < 0.0 || !k[1].is_finite()) {
            return Err(ScenarioError::InvalidConfig(format!(
                "{what}: negative or non-finite speed"
            )));
        }
        Ok(())
    }
}

/// A path-following body. Positions along `path` are `(north, east)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub path: Vec<[f64; 2]>,
    pub speed: SpeedProfile,
    /// Time at which the body appears at the start of its path (s).
    #[serde(default)]
    pub start_time: f64,
}

impl MotionConfig {
    pub fn straight(from: [f64; 2], to: [f64; 2], speed: f64, start_time: f64) -> Self {
        Self {
            path: vec![from, to],
            speed: SpeedProfile::constant(speed),
            start_time,
        }
    }

    pub fn path_points(&self) -> Vec<MapPoint> {
        self.path
            .iter()
            .map(|p| MapPoint::new(p[0], p[1]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub class: SemanticClass,
    #[serde(flatten)]
    pub motion: MotionConfig,
    /// Footprint `(length, width)` in meters; class default when absent.
    #[serde(default)]
    pub size: Option<[f64; 2]>,
    /// Body height in meters; class default when absent.
    #[serde(default)]
    pub height: Option<f64>,
}

impl ActorConfig {
    pub fn footprint(&self) -> (f64, f64) {
        match self.size {
            Some([l, w]) => (l, w),
            None => match self.class {
                SemanticClass::Vehicle => (4.5, 1.8),
                SemanticClass::Pedestrian => (0.5, 0.5),
                _ => (0.3, 0.3),
            },
        }
    }

    pub fn body_height(&self) -> f64 {
        self.height.unwrap_or(match self.class {
            SemanticClass::Vehicle => 1.5,
            SemanticClass::Pedestrian => 1.75,
            _ => 1.0,
        })
    }
}

/// Multipath surrogate: a lateral GNSS offset to the right of the ego heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEpisode {
    pub start: f64,
    pub duration: f64,
    pub lateral: f64,
}

impl BiasEpisode {
    pub fn active(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

/// Sensor noise. Pixel quantities are given for a 1000 px focal length and
/// scaled with the camera's actual focal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub gnss_sigma: f64,
    pub gnss_bias_episodes: Vec<BiasEpisode>,
    /// Heading drift rate of the INS (rad/s).
    pub ins_heading_drift: f64,
    pub ins_speed_sigma: f64,
    pub disparity_sigma: f64,
    pub flow_sigma: f64,
    pub lane_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gnss_sigma: 1.0,
            gnss_bias_episodes: vec![BiasEpisode {
                start: 4.0,
                duration: 3.0,
                lateral: 3.0,
            }],
            ins_heading_drift: 0.008,
            ins_speed_sigma: 0.05,
            disparity_sigma: 0.2,
            flow_sigma: 0.5,
            lane_sigma: 0.05,
        }
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self {
            gnss_sigma: 0.0,
            gnss_bias_episodes: Vec::new(),
            ins_heading_drift: 0.0,
            ins_speed_sigma: 0.0,
            disparity_sigma: 0.0,
            flow_sigma: 0.0,
            lane_sigma: 0.0,
        }
    }
}

/// Geometry of the generated four-way intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    /// Roads run from `-half_length` to `half_length` along both axes.
    pub half_length: f64,
    pub lane_width: f64,
    /// Curb-to-facade distance (m).
    pub sidewalk: f64,
    pub building_height: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            half_length: 150.0,
            lane_width: 3.5,
            sidewalk: 3.0,
            building_height: 25.0,
        }
    }
}

impl LayoutConfig {
    /// Distance from the road axis to the curb.
    pub fn road_half_width(&self) -> f64 {
        2.0 * self.lane_width
    }

    pub fn facade_offset(&self) -> f64 {
        self.road_half_width() + self.sidewalk
    }
}

/// Which rendered actors count as scoreable ground truth in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityConfig {
    /// Actors farther than this from the camera are not scored (m).
    pub max_range: f64,
    /// Minimum fraction of the unoccluded silhouette that must be visible.
    pub min_visible_fraction: f64,
    /// Minimum number of image columns the actor must own, at 1000 px focal length.
    pub min_columns: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            max_range: 45.0,
            min_visible_fraction: 0.5,
            min_columns: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration: f64,
    pub frame_rate: f64,
    pub camera: CameraIntrinsics,
    pub camera_height: f64,
    pub layout: LayoutConfig,
    pub ego: MotionConfig,
    pub actors: Vec<ActorConfig>,
    pub noise: NoiseConfig,
    pub visibility: VisibilityConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::nominal(0)
    }
}

fn actor(
    class: SemanticClass,
    from: [f64; 2],
    to: [f64; 2],
    speed: f64,
    start_time: f64,
) -> ActorConfig {
    ActorConfig {
        class,
        motion: MotionConfig::straight(from, to, speed, start_time),
        size: None,
        height: None,
    }
}

impl ScenarioConfig {
    /// The default urban-canyon drive: the ego approaches and crosses the
    /// intersection northbound among through traffic, cross traffic,
    /// pedestrians and curbside bollards.
    pub fn nominal(seed: u64) -> Self {
        use SemanticClass::{Other, Pedestrian, Vehicle};
        let l = 150.0;
        let mut actors = vec![
            // northbound
            actor(Vehicle, [-52.0, 1.75], [l, 1.75], 5.5, 0.0),
            actor(Vehicle, [-95.0, 5.25], [l, 5.25], 7.5, 0.0),
            actor(Vehicle, [-60.0, 5.25], [l, 5.25], 4.5, 9.0),
            // southbound
            actor(Vehicle, [60.0, -1.75], [-l, -1.75], 6.0, 0.0),
            actor(Vehicle, [90.0, -1.75], [-l, -1.75], 5.0, 3.0),
            actor(Vehicle, [30.0, -5.25], [30.0, -5.25], 0.0, 0.0),
            // eastbound and westbound cross traffic, after the through traffic clears
            actor(Vehicle, [-1.75, -70.0], [-1.75, l], 8.0, 8.5),
            actor(Vehicle, [1.75, 80.0], [1.75, -l], 7.0, 9.5),
            actor(Vehicle, [-5.25, -60.0], [-5.25, l], 6.0, 8.0),
            // sidewalks and a crosswalk north of the junction
            actor(Pedestrian, [-45.0, 8.6], [l, 8.6], 1.4, 0.0),
            actor(Pedestrian, [-20.0, -8.6], [-l, -8.6], 1.2, 0.0),
            actor(Pedestrian, [-38.0, -8.4], [-l, -8.4], 1.0, 0.0),
            actor(Pedestrian, [12.5, -9.0], [12.5, 9.0], 1.3, 0.0),
            actor(Pedestrian, [-30.0, 9.2], [-30.0, 9.2], 0.0, 0.0),
        ];
        // bollard rows along both curbs of the approach
        let mut north = -66.0;
        while north < -10.0 {
            actors.push(actor(Other, [north, 7.4], [north, 7.4], 0.0, 0.0));
            actors.push(actor(
                Other,
                [north + 0.7, -7.4],
                [north + 0.7, -7.4],
                0.0,
                0.0,
            ));
            north += 1.4;
        }
        Self {
            seed,
            duration: 20.0,
            frame_rate: 15.0,
            camera: CameraIntrinsics::full_resolution(),
            camera_height: 1.5,
            layout: LayoutConfig::default(),
            ego: MotionConfig::straight([-70.0, 1.75], [l, 1.75], 5.0, 0.0),
            actors,
            noise: NoiseConfig::default(),
            visibility: VisibilityConfig::default(),
        }
    }

    /// Same drive with every noise source switched off.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            noise: NoiseConfig::zero(),
            ..Self::nominal(seed)
        }
    }

    /// Switches to the 256 x 192 camera.
    pub fn fast(mut self) -> Self {
        self.camera = CameraIntrinsics::fast();
        self
    }

    /// Pixel-unit scale relative to the 1000 px reference focal length.
    pub fn pixel_scale(&self) -> f64 {
        self.camera.f_u / 1000.0
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.to_string()));
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate must be positive");
        }
        if !(self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !(self.camera_height > 0.0) {
            return bad("camera_height must be positive");
        }
        self.camera
            .validate()
            .map_err(|e| ScenarioError::InvalidConfig(e.to_string()))?;
        if !(self.layout.lane_width > 2.0)
            || !(self.layout.sidewalk > 0.0)
            || !(self.layout.half_length > self.layout.facade_offset())
        {
            return bad("layout dimensions are inconsistent");
        }
        if self.ego.path.len() < 2 {
            return bad("ego path needs at least two points");
        }
        self.ego.speed.validate("ego")?;
        for (i, a) in self.actors.iter().enumerate() {
            if a.motion.path.is_empty() {
                return bad(&format!("actor {i} has an empty path"));
            }
            if a.class == SemanticClass::Building {
                return bad(&format!("actor {i}: buildings come from the layout"));
            }
            a.motion.speed.validate(&format!("actor {i}"))?;
            let (len, wid) = a.footprint();
            if !(len > 0.0 && wid > 0.0 && a.body_height() > 0.0) {
                return bad(&format!("actor {i} has a degenerate body"));
            }
        }
        Ok(())
    }
}
