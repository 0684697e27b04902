//! The highway MDP: advance ego and traffic one frame, detect collisions and
//! road departures, build the normalized observation, and score the step.
//!
//! Observation layout (10 inputs): the eight sector distances divided by the
//! radar range in the order front, front_right, right, back_right, back,
//! back_left, left, front_left; then lane/6; then forward speed over the
//! current lane's limit, clamped to [0, 1]. A sector reads 1.0 exactly when
//! empty.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shield::{occupancy, SectorOccupancy, ShieldConfig};
use crate::traffic::TrafficSource;
use crate::types::{
    direction_of_lane, Action, EnvSnapshot, TrackConfig, VehicleState, EGO_ID, NUM_LANES,
};

pub const OBSERVATION_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub sector_distances: [f64; 8],
    pub lane_fraction: f64,
    pub speed_fraction: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBSERVATION_DIM] {
        let mut out = [0.0; OBSERVATION_DIM];
        out[..8].copy_from_slice(&self.sector_distances);
        out[8] = self.lane_fraction;
        out[9] = self.speed_fraction;
        out
    }
}

/// Builds the normalized state vector from a snapshot.
pub fn observe(snapshot: &EnvSnapshot, cfg: &ShieldConfig, track: &TrackConfig) -> Observation {
    let occ: SectorOccupancy = occupancy(snapshot, cfg);
    let mut sector_distances = [1.0; 8];
    for (d, nearest) in sector_distances.iter_mut().zip(occ.nearest) {
        *d = (nearest / cfg.radar_range).clamp(0.0, 1.0);
    }
    let ego = &snapshot.ego;
    let v_max = track.speed_limit(ego.lane);
    Observation {
        sector_distances,
        lane_fraction: ego.lane as f64 / NUM_LANES as f64,
        speed_fraction: (ego.speed() / v_max).clamp(0.0, 1.0),
    }
}

/// Reward weights and the optional normalized-velocity variant.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RewardConfig {
    pub w_lane_change: f64,
    pub w_velocity: f64,
    pub w_collision: f64,
    pub w_off_road: f64,
    /// When set, the velocity term uses v/v_max instead of raw m/s.
    pub normalize_velocity: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_lane_change: 5.0,
            w_velocity: 0.01,
            w_collision: 100.0,
            w_off_road: 100.0,
            normalize_velocity: false,
        }
    }
}

/// Unweighted reward components for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardComponents {
    pub lane_change: f64,
    pub velocity: f64,
    pub collision: f64,
    pub off_road: f64,
}

impl RewardComponents {
    pub fn weighted_sum(&self, cfg: &RewardConfig) -> f64 {
        cfg.w_lane_change * self.lane_change
            + cfg.w_velocity * self.velocity
            + cfg.w_collision * self.collision
            + cfg.w_off_road * self.off_road
    }
}

/// Terminal penalty scale: -(1 - 0.8 * progress / total).
fn terminal_penalty(progress: f64, total: f64) -> f64 {
    -(1.0 - 0.8 * (progress / total).clamp(0.0, 1.0))
}

/// Events observed during one step, input to the reward.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepEvents {
    /// A lane-change action was chosen at this decision step.
    pub lane_change_decision: bool,
    pub collision: bool,
    pub off_road: bool,
    /// Ego longitudinal progress at the event, meters.
    pub progress: f64,
}

/// Scores one step. The lane-change penalty fires on the decision, not on
/// the later boundary crossing; the velocity term uses the ego's forward
/// speed after the step.
pub fn compute_reward(
    cfg: &RewardConfig,
    events: &StepEvents,
    ego_speed: f64,
    v_max: f64,
    track_length: f64,
) -> (f64, RewardComponents) {
    let components = RewardComponents {
        lane_change: if events.lane_change_decision { -1.0 } else { 0.0 },
        velocity: if cfg.normalize_velocity { ego_speed / v_max } else { ego_speed },
        collision: if events.collision {
            terminal_penalty(events.progress, track_length)
        } else {
            0.0
        },
        off_road: if events.off_road {
            terminal_penalty(events.progress, track_length)
        } else {
            0.0
        },
    };
    (components.weighted_sum(cfg), components)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    None,
    Collision,
    OffRoad,
    TrackEnd,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::None => "none",
            Termination::Collision => "collision",
            Termination::OffRoad => "off_road",
            Termination::TrackEnd => "track_end",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub components: RewardComponents,
    pub done: bool,
    pub termination: Termination,
    /// Meaningful only when termination is Collision.
    pub ego_caused: bool,
}

/// One frame's command: the maneuver in force, whether this frame is the
/// decision that initiated it, and the low-level outputs. `lateral_rate` is
/// the PI controller's command applied as the ego's lateral velocity for the
/// frame (the low-level loop is assumed to track it within one step).
#[derive(Clone, Copy, Debug)]
pub struct StepCommand {
    pub action: Action,
    pub decision: bool,
    pub longitudinal_accel: f64,
    pub lateral_rate: f64,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("spawn box overlaps traffic at lane {lane}, x {x:.1}")]
    SpawnBlocked { lane: u8, x: f64 },
    #[error("step called after episode end")]
    StepAfterDone,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpawnSpec {
    pub lane: u8,
    pub x: f64,
    /// Initial forward speed; defaults to the lane's speed limit.
    pub speed: Option<f64>,
}

/// The environment: one ego driven by commands, traffic replayed from a
/// source frame by frame. Single-threaded; run parallel episodes on separate
/// instances.
pub struct HighwayEnv {
    track: TrackConfig,
    shield_cfg: ShieldConfig,
    reward_cfg: RewardConfig,
    traffic: Arc<dyn TrafficSource>,
    ego: VehicleState,
    frame: usize,
    start_x: f64,
    termination: Termination,
    /// Frame of the most recent lane-change decision, for collision
    /// attribution. The two-second window runs from the maneuver's
    /// initiation.
    last_lane_change_frame: Option<usize>,
}

impl HighwayEnv {
    pub fn reset(
        track: TrackConfig,
        shield_cfg: ShieldConfig,
        reward_cfg: RewardConfig,
        traffic: Arc<dyn TrafficSource>,
        spawn: SpawnSpec,
    ) -> Result<(HighwayEnv, Observation), EnvError> {
        let direction = direction_of_lane(spawn.lane);
        let speed = spawn.speed.unwrap_or_else(|| track.speed_limit(spawn.lane));
        let ego = VehicleState {
            id: EGO_ID,
            lane: spawn.lane,
            x: spawn.x,
            y: track.lane_center(spawn.lane),
            length: 4.5,
            width: 2.0,
            vx: direction.sign() * speed,
            vy: 0.0,
            direction,
        };
        // Spawn clearance: the ego starts at the lane limit, usually faster
        // than surrounding traffic, so it needs braking room ahead and a
        // buffer behind before the unreactive follower reaches it.
        let forward = direction.sign();
        for tv in traffic.frame(0) {
            let blocked = if tv.lane == ego.lane {
                let rel = (tv.x - ego.x) * forward;
                rel > -45.0 && rel < 75.0
            } else {
                let mut near_box = ego;
                near_box.length += 20.0;
                near_box.width += 0.5;
                near_box.overlaps(tv)
            };
            if blocked {
                return Err(EnvError::SpawnBlocked { lane: spawn.lane, x: spawn.x });
            }
        }
        let env = HighwayEnv {
            track,
            shield_cfg,
            reward_cfg,
            traffic,
            ego,
            frame: 0,
            start_x: spawn.x,
            termination: Termination::None,
            last_lane_change_frame: None,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            ego: self.ego,
            traffic: self.traffic.frame(self.frame).to_vec(),
            frame_index: self.frame,
        }
    }

    pub fn observe(&self) -> Observation {
        observe(&self.snapshot(), &self.shield_cfg, &self.track)
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn done(&self) -> bool {
        self.termination != Termination::None
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Longitudinal progress along the travel direction since spawn.
    pub fn progress(&self) -> f64 {
        (self.ego.x - self.start_x) * self.ego.direction.sign()
    }

    pub fn track(&self) -> &TrackConfig {
        &self.track
    }

    pub fn shield_config(&self) -> &ShieldConfig {
        &self.shield_cfg
    }

    pub fn step(&mut self, cmd: StepCommand) -> Result<StepResult, EnvError> {
        if self.done() {
            return Err(EnvError::StepAfterDone);
        }
        let dt = self.track.dt;
        let dir = self.ego.direction;

        // Longitudinal: integrate, then clamp speed to the lane limit.
        let speed = self.ego.speed();
        self.ego.x += self.ego.vx * dt + 0.5 * dir.sign() * cmd.longitudinal_accel * dt * dt;
        let v_max = self.track.speed_limit(self.ego.lane);
        let new_speed = (speed + cmd.longitudinal_accel * dt).clamp(0.0, v_max);
        self.ego.vx = dir.sign() * new_speed;

        // Lateral: the command is the achieved lateral velocity this frame.
        self.ego.vy = cmd.lateral_rate;
        self.ego.y += self.ego.vy * dt;

        // Lane attribute switches at the geometric boundary midline.
        if let Some(lane) = self.track.lane_of_y(self.ego.y) {
            self.ego.lane = lane;
        }

        if cmd.decision && cmd.action != Action::LaneKeeping {
            self.last_lane_change_frame = Some(self.frame);
        }

        // Traffic advances one recorded frame.
        self.frame += 1;
        let traffic = self.traffic.frame(self.frame);

        let colliding = traffic.iter().find(|tv| self.ego.overlaps(tv)).copied();
        let (band_lo, band_hi) = self.track.legal_band(dir);
        let off_road = self.ego.y < band_lo || self.ego.y > band_hi;
        let progress = self.progress();

        let mut ego_caused = false;
        if let Some(tv) = colliding {
            self.termination = Termination::Collision;
            ego_caused = self.classify_collision(&tv);
        } else if off_road {
            self.termination = Termination::OffRoad;
        } else if progress >= self.track.episode_length {
            self.termination = Termination::TrackEnd;
        }

        let events = StepEvents {
            lane_change_decision: cmd.decision && cmd.action != Action::LaneKeeping,
            collision: colliding.is_some(),
            off_road: colliding.is_none() && off_road,
            progress,
        };
        let v_max = self.track.speed_limit(self.ego.lane);
        let (reward, components) = compute_reward(
            &self.reward_cfg,
            &events,
            self.ego.speed(),
            v_max,
            self.track.track_length,
        );

        Ok(StepResult {
            observation: self.observe(),
            reward,
            components,
            done: self.done(),
            termination: self.termination,
            ego_caused,
        })
    }

    /// A collision is not the ego's fault only when the other vehicle's
    /// leading face struck the ego's rear half while the ego had not begun
    /// a lane change within the last two seconds.
    fn classify_collision(&self, tv: &VehicleState) -> bool {
        let dir = self.ego.direction;
        let rel = (tv.x - self.ego.x) * dir.sign();
        let tv_leading_edge = rel + tv.length / 2.0;
        let struck_from_back = rel < 0.0 && tv_leading_edge <= 0.0;
        let window_frames = (2.0 / self.track.dt).round() as usize;
        let recent_lane_change = self
            .last_lane_change_frame
            .is_some_and(|f| self.frame.saturating_sub(f) <= window_frames);
        !(struck_from_back && !recent_lane_change)
    }
}
