//! Synthetic urban intersection: layout, actors, rendering and sensors.

mod config;
mod layout;
pub mod render;
mod sim;

pub use config::{
    ActorConfig, BiasEpisode, LayoutConfig, MotionConfig, NoiseConfig, ScenarioConfig,
    ScenarioError, SpeedProfile, VisibilityConfig,
};
pub use layout::build_intersection;
pub use sim::{pose_on_path, simulate, ActorTruth, FrameTruth, SensorFrame, Simulator};
