use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::render::{render, Body, Rendering};
use super::{ActorConfig, MotionConfig, ScenarioConfig, ScenarioError};
use crate::frames::{map_to_camera, EgoPose, Heading, MapPoint, EPSILON_DEPTH};
use crate::geom::rectangle;
use crate::localization::{GnssReading, InsReading, LaneObservation};
use crate::map::{DigitalMap, LaneAssignment};
use crate::raster::{DisparityImage, LabelImage, PixelClass};
use crate::stixel::SemanticClass;
use crate::tracking::FlowVector;

/// Instance ids of buildings in the rendered instance raster start here.
const BUILDING_INSTANCE_BASE: u32 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorTruth {
    /// 1-based index into the scenario's actor list.
    pub id: u32,
    pub class: SemanticClass,
    pub position: MapPoint,
    pub heading: Heading,
    pub speed: f64,
    pub lane: LaneAssignment,
    /// Whether the actor is visible enough in this frame to be scored.
    pub evaluated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub ego: EgoPose,
    pub ego_speed: f64,
    pub ego_lane: LaneAssignment,
    pub actors: Vec<ActorTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub index: usize,
    pub timestamp: f64,
    pub disparity: DisparityImage,
    pub labels: LabelImage,
    pub gnss: GnssReading,
    pub ins: InsReading,
    pub lane_obs: LaneObservation,
    pub flow: Vec<FlowVector>,
    pub truth: FrameTruth,
}

/// Position, heading and speed of a path follower at time `t`, or `None`
/// before it appears or after it has run off the end of its path.
pub fn pose_on_path(motion: &MotionConfig, t: f64) -> Option<(MapPoint, Heading, f64)> {
    let local = t - motion.start_time;
    if local < 0.0 {
        return None;
    }
    let pts = motion.path_points();
    let mut s = motion.speed.distance_at(local);
    let speed = motion.speed.speed_at(local);
    let mut heading = Heading::new(0.0);
    for w in pts.windows(2) {
        let seg = w[1].sub(&w[0]);
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        heading = Heading::new(seg.east.atan2(seg.north));
        if s <= len {
            return Some((w[0].add(&seg.scale(s / len)), heading, speed));
        }
        s -= len;
    }
    // zero-length paths are parked bodies
    (s <= 1e-9 || pts.len() == 1 || pts.windows(2).all(|w| w[0] == w[1]))
        .then(|| (pts[pts.len() - 1], heading, 0.0))
}

fn footprint(actor: &ActorConfig, center: MapPoint, heading: Heading) -> Vec<MapPoint> {
    let (len, wid) = actor.footprint();
    let fwd = heading.forward();
    let right = heading.right();
    rectangle(-len / 2.0, len / 2.0, -wid / 2.0, wid / 2.0)
        .into_iter()
        .map(|p| center.add(&fwd.scale(p.north)).add(&right.scale(p.east)))
        .collect()
}

fn pixel_class(class: SemanticClass) -> PixelClass {
    PixelClass::from(class)
}

/// Streaming frame generator; frames come out in time order.
pub struct Simulator {
    cfg: ScenarioConfig,
    map: DigitalMap,
    rng: ChaCha8Rng,
    index: usize,
    buildings: Vec<Body>,
    /// Projected centers of the previous frame, per actor.
    previous_centers: Vec<Option<(f64, f64)>>,
}

/// Starts a deterministic frame stream for `cfg` over `map`.
pub fn simulate(cfg: &ScenarioConfig, map: &DigitalMap) -> Result<Simulator, ScenarioError> {
    cfg.validate()?;
    let buildings = map
        .buildings
        .iter()
        .enumerate()
        .map(|(k, b)| Body {
            footprint: b.clone(),
            top: cfg.layout.building_height,
            class: PixelClass::Building,
            instance: BUILDING_INSTANCE_BASE + k as u32,
        })
        .collect();
    Ok(Simulator {
        cfg: cfg.clone(),
        map: map.clone(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        index: 0,
        buildings,
        previous_centers: vec![None; cfg.actors.len()],
    })
}

impl Simulator {
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn map(&self) -> &DigitalMap {
        &self.map
    }

    fn normal(&mut self, sigma: f64) -> f64 {
        // always draw so the stream layout does not depend on noise levels
        let z: f64 = StandardNormal.sample(&mut self.rng);
        sigma * z
    }

    fn generate(&mut self) -> SensorFrame {
        let cfg = &self.cfg;
        let t = self.index as f64 / cfg.frame_rate;
        let cam = cfg.camera;
        let scale = cfg.pixel_scale();
        let (ego_pos, ego_heading, ego_speed) = pose_on_path(&cfg.ego, t).unwrap_or_else(|| {
            let pts = cfg.ego.path_points();
            (pts[pts.len() - 1], Heading::new(0.0), 0.0)
        });
        let ego = EgoPose::new(ego_pos, ego_heading, t);

        let states: Vec<_> = cfg
            .actors
            .iter()
            .map(|a| pose_on_path(&a.motion, t))
            .collect();
        let mut bodies = self.buildings.clone();
        let mut body_of_actor = vec![None; cfg.actors.len()];
        for (k, (actor, state)) in cfg.actors.iter().zip(&states).enumerate() {
            if let Some((c, h, _)) = state {
                body_of_actor[k] = Some(bodies.len());
                bodies.push(Body {
                    footprint: footprint(actor, *c, *h),
                    top: actor.body_height(),
                    class: pixel_class(actor.class),
                    instance: k as u32 + 1,
                });
            }
        }
        let rendering: Rendering = render(&cam, cfg.camera_height, &ego, &bodies);

        let vis = cfg.visibility;
        let mut actors = Vec::new();
        let mut centers = vec![None; cfg.actors.len()];
        let mut flow_truth = Vec::new();
        for (k, (actor, state)) in cfg.actors.iter().zip(&states).enumerate() {
            let Some((pos, heading, speed)) = *state else {
                continue;
            };
            let cov = body_of_actor[k]
                .map(|b| rendering.coverage[b])
                .unwrap_or_default();
            let rel = map_to_camera(pos, &ego);
            let evaluated = actor.class.is_traffic()
                && rel.range() <= vis.max_range
                && !cov.touches_border
                && cov.visible_columns as f64 >= vis.min_columns * scale
                && cov.visible_pixels as f64
                    >= vis.min_visible_fraction * cov.unoccluded_pixels as f64
                && cov.visible_pixels > 0;
            actors.push(ActorTruth {
                id: k as u32 + 1,
                class: actor.class,
                position: pos,
                heading,
                speed,
                lane: self.map.assign_lane(&pos),
                evaluated,
            });
            if rel.north > EPSILON_DEPTH {
                let u = cam.c_u + cam.f_u * rel.east / rel.north;
                let v =
                    cam.c_v + (cfg.camera_height - actor.body_height() / 2.0) * cam.f_u / rel.north;
                centers[k] = Some((u, v));
                if cov.visible_pixels > 0 {
                    if let Some((pu, pv)) = self.previous_centers[k] {
                        flow_truth.push((u, v, u - pu, v - pv));
                    }
                }
            }
        }

        let noise = cfg.noise.clone();
        let mut disparity = rendering.disparity;
        for d in disparity.data.iter_mut() {
            let e = self.normal(noise.disparity_sigma * scale);
            if *d > 0.0 {
                *d = (*d + e as f32).max(0.0);
            }
        }
        let disparity = disparity.quantized();

        let flow = flow_truth
            .into_iter()
            .map(|(u, v, du, dv)| {
                let (nu, nv) = (
                    self.normal(noise.flow_sigma * scale),
                    self.normal(noise.flow_sigma * scale),
                );
                FlowVector {
                    u,
                    v,
                    du: du + nu,
                    dv: dv + nv,
                }
            })
            .collect();

        let bias = noise
            .gnss_bias_episodes
            .iter()
            .filter(|e| e.active(t))
            .map(|e| e.lateral)
            .sum::<f64>();
        let (gn, ge) = (self.normal(noise.gnss_sigma), self.normal(noise.gnss_sigma));
        let gnss_pos = ego_pos
            .add(&MapPoint::new(gn, ge))
            .add(&ego_heading.right().scale(bias));
        let ins = InsReading {
            speed: ego_speed + self.normal(noise.ins_speed_sigma),
            heading: ego_heading.offset(noise.ins_heading_drift * t),
            timestamp: t,
        };
        let (nl, nr) = (self.normal(noise.lane_sigma), self.normal(noise.lane_sigma));
        let lane_obs = match self.map.lane_line_distances(&ego_pos, ego_heading) {
            Some((l, r)) if !self.map.in_intersection(&ego_pos) => LaneObservation {
                dist_left: l + nl,
                dist_right: r + nr,
                valid: true,
            },
            _ => LaneObservation::invalid(),
        };

        self.previous_centers = centers;
        let frame = SensorFrame {
            index: self.index,
            timestamp: t,
            disparity,
            labels: rendering.labels,
            gnss: GnssReading {
                position: gnss_pos,
                timestamp: t,
            },
            ins,
            lane_obs,
            flow,
            truth: FrameTruth {
                ego,
                ego_speed,
                ego_lane: self.map.assign_lane(&ego_pos),
                actors,
            },
        };
        self.index += 1;
        frame
    }
}

impl Iterator for Simulator {
    type Item = SensorFrame;

    fn next(&mut self) -> Option<SensorFrame> {
        (self.index < self.cfg.frame_count()).then(|| self.generate())
    }
}
