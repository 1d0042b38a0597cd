//! The combined run configuration, one TOML section per stage.
//!
//! ```toml
//! [scenario]
//! seed = 3
//! [pipeline.tracking]
//! gate = 30.0
//! [pipeline.ablation]
//! heading_correction = false
//! [evaluation]
//! match_radius = 2.0
//! ```
//!
//! Anything left out keeps its default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evaluation::EvalParams;
use crate::io::{load_toml, IoError};
use crate::pipeline::PipelineConfig;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub evaluation: EvalParams,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        load_toml(path)
    }

    /// One seed drives both the simulator and the particle filter.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self.pipeline.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: Config = toml::from_str(
            "[pipeline.tracking]\ngate = 30.0\n[pipeline.ablation]\nheading_correction = false\n",
        )
        .unwrap();
        assert_eq!(cfg.pipeline.tracking.gate, 30.0);
        assert!(!cfg.pipeline.ablation.heading_correction);
        assert_eq!(
            cfg.pipeline.tracking.q,
            PipelineConfig::default().tracking.q
        );
        assert_eq!(cfg.scenario, ScenarioConfig::default());
    }

    #[test]
    fn unknown_sections_are_rejected() {
        assert!(toml::from_str::<Config>("[tracker]\ngate = 1.0\n").is_err());
    }

    #[test]
    fn full_config_round_trips() {
        let cfg = Config::default().with_seed(9);
        let back: Config = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.pipeline.seed, 9);
    }
}
