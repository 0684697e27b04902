//! Run configuration: one structure covering every module, serializable as
//! JSON. Values present in a config file override command-line flags; flags
//! cover whatever the file omits.

use std::path::PathBuf;

use highway::agent::Hyperparams;
use highway::control::ControlConfig;
use highway::env::RewardConfig;
use highway::shield::ShieldConfig;
use highway::traffic::SynthSpec;
use highway::types::{Direction, TrackConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Dqn,
    Dqnsl,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Dqnsl => "dqnsl",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dqn" => Ok(AgentKind::Dqn),
            "dqnsl" => Ok(AgentKind::Dqnsl),
            other => Err(format!("unknown agent '{other}' (expected dqn or dqnsl)")),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_test_episodes() -> u64 {
    50
}

fn default_density_range() -> (f64, f64) {
    (0.5, 1.5)
}

fn default_max_frames() -> usize {
    3000
}

fn default_synth() -> SynthSpec {
    SynthSpec {
        lane_rates_per_min: [0.0, 0.0, 0.0, 8.0, 8.0, 8.0],
        ..SynthSpec::default()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub direction: Direction,
    /// Shield use during training. DQNSL requires it on.
    pub shield_on: bool,
    /// Replay a recorded track instead of synthetic traffic.
    pub track_file: Option<PathBuf>,
    /// Ego spawn lane; defaults to the middle same-direction lane.
    pub spawn_lane: Option<u8>,
    /// Hard per-episode frame cap (treated as reaching the track end).
    pub max_frames: usize,
    pub checkpoint_every: Option<u64>,
    pub test_episodes: u64,
    /// Per-episode traffic density multiplier range for the test protocol.
    pub density_range: (f64, f64),
    pub track: TrackConfig,
    pub shield: ShieldConfig,
    pub control: ControlConfig,
    pub reward: RewardConfig,
    pub hyper: Hyperparams,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agent: AgentKind::Dqnsl,
            seeds: default_seeds(),
            episodes: 1500,
            direction: Direction::LeftToRight,
            shield_on: true,
            track_file: None,
            spawn_lane: None,
            max_frames: default_max_frames(),
            checkpoint_every: None,
            test_episodes: default_test_episodes(),
            density_range: default_density_range(),
            track: TrackConfig::default(),
            shield: ShieldConfig::default(),
            control: ControlConfig::default(),
            reward: RewardConfig::default(),
            hyper: Hyperparams::default(),
            synth: default_synth(),
        }
    }
}

impl RunConfig {
    /// Middle lane of the ego's direction group unless overridden.
    pub fn spawn_lane_or_default(&self) -> u8 {
        self.spawn_lane.unwrap_or(match self.direction {
            Direction::LeftToRight => 5,
            Direction::RightToLeft => 2,
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.agent == AgentKind::Dqnsl && !self.shield_on {
            return Err("dqnsl requires the shield during training".into());
        }
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        let lane = self.spawn_lane_or_default();
        if !(1..=6).contains(&lane) {
            return Err(format!("spawn lane {lane} outside 1..=6"));
        }
        if highway::types::direction_of_lane(lane) != self.direction {
            return Err(format!(
                "spawn lane {lane} does not carry {} traffic",
                self.direction.name()
            ));
        }
        if self.episodes == 0 {
            return Err("episodes must be positive".into());
        }
        Ok(())
    }
}

/// Overlays values present in `file` (parsed JSON) onto `base`: the config
/// file wins over flags, recursively for nested objects.
pub fn merge_file_over(
    base: &RunConfig,
    file: &serde_json::Value,
) -> Result<RunConfig, serde_json::Error> {
    let mut value = serde_json::to_value(base)?;
    overlay(&mut value, file);
    serde_json::from_value(value)
}

fn overlay(base: &mut serde_json::Value, file: &serde_json::Value) {
    match (base, file) {
        (serde_json::Value::Object(b), serde_json::Value::Object(f)) => {
            for (key, fv) in f {
                match b.get_mut(key) {
                    Some(bv) => overlay(bv, fv),
                    None => {
                        b.insert(key.clone(), fv.clone());
                    }
                }
            }
        }
        (slot, replacement) => *slot = replacement.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_flags() {
        let mut base = RunConfig { episodes: 300, ..Default::default() };
        base.hyper.batch_size = 64;
        let file: serde_json::Value =
            serde_json::from_str(r#"{"episodes": 7, "hyper": {"gamma": 0.9}}"#).unwrap();
        let merged = merge_file_over(&base, &file).unwrap();
        assert_eq!(merged.episodes, 7); // file wins
        assert_eq!(merged.hyper.batch_size, 64); // flag preserved
        assert_eq!(merged.hyper.gamma, 0.9); // nested file value applied
    }

    #[test]
    fn dqnsl_requires_shield() {
        let cfg = RunConfig { agent: AgentKind::Dqnsl, shield_on: false, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn spawn_lane_must_match_direction() {
        let cfg = RunConfig {
            direction: Direction::RightToLeft,
            spawn_lane: Some(5),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { direction: Direction::RightToLeft, ..Default::default() };
        assert_eq!(cfg.spawn_lane_or_default(), 2);
        assert!(cfg.validate().is_ok());
    }
}
