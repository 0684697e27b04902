//! Rule-based longitudinal acceleration and the lateral path: switch box
//! from action to target lane center plus a PI controller.
//!
//! The longitudinal law has three regimes. Free road: close the gap to the
//! lane limit over a one-second control horizon. Following: the constant
//! deceleration that matches the leader's speed exactly when the gap shrinks
//! to the critical distance C = max(10 m, 1.5 s * v). Emergency (gap <= C):
//! the deceleration that stops within the remaining gap. Acceleration is
//! clamped to comfort limits; deceleration may use full braking in the
//! following and emergency regimes.
//!
//! The PI controller outputs the lateral command `a_y`; the environment
//! applies it as the achieved lateral velocity for the frame (an ideal inner
//! loop). Pure PI position control through a double integrator would be
//! unstable, so the inner-loop reading is the one under which the documented
//! gains settle a lane change in about three seconds without overshoot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{left_lane_of, right_lane_of, Action, Direction, EnvSnapshot, TrackConfig};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ControlConfig {
    /// Horizon for the free-road gap-to-limit law, seconds.
    pub control_horizon: f64,
    /// Acceleration magnitude bound outside emergencies, m/s^2.
    pub a_max_comfort: f64,
    /// Braking bound, m/s^2.
    pub a_max_brake: f64,
    /// Critical distance floor, meters.
    pub critical_base: f64,
    /// Critical distance headway, seconds of current speed.
    pub critical_headway: f64,
    /// Gap below which the division in the emergency law is abandoned for
    /// full braking, meters.
    pub degenerate_gap: f64,
    pub kp: f64,
    pub ki: f64,
    pub integral_windup: f64,
    pub output_limit: f64,
    /// Lateral error below which a lane-change maneuver completes, meters.
    pub settle_tolerance: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            control_horizon: 1.0,
            a_max_comfort: 3.0,
            a_max_brake: 8.0,
            critical_base: 10.0,
            critical_headway: 1.5,
            degenerate_gap: 0.5,
            kp: 1.4,
            ki: 0.05,
            integral_windup: 2.0,
            output_limit: 4.0,
            settle_tolerance: 0.1,
        }
    }
}

impl ControlConfig {
    pub fn critical_distance(&self, speed: f64) -> f64 {
        self.critical_base.max(self.critical_headway * speed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LongitudinalScenario {
    FreeRoad,
    Follow,
    EmergencyBrake,
}

#[derive(Clone, Copy, Debug)]
pub struct LongitudinalCommand {
    pub accel: f64,
    pub v_desired: f64,
    pub scenario: LongitudinalScenario,
}

/// Nearest same-lane vehicle ahead of the ego within radar range, as
/// (bumper gap, leader forward speed).
pub fn front_gap(snapshot: &EnvSnapshot, radar_range: f64) -> Option<(f64, f64)> {
    let ego = &snapshot.ego;
    let mut best: Option<(f64, f64)> = None;
    for tv in &snapshot.traffic {
        if tv.lane != ego.lane || ego.center_distance(tv) >= radar_range {
            continue;
        }
        if (tv.x - ego.x) * ego.direction.sign() <= 0.0 {
            continue;
        }
        let gap = ego.rect_gap(tv);
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, tv.speed()));
        }
    }
    best
}

/// The three-regime longitudinal law. `front` is the (gap, leader speed)
/// pair when the front sector is busy; `dt` is the simulation step used for
/// the desired-velocity update.
pub fn longitudinal_accel(
    cfg: &ControlConfig,
    ego_speed: f64,
    v_max: f64,
    front: Option<(f64, f64)>,
    dt: f64,
) -> LongitudinalCommand {
    let (accel, scenario) = match front {
        None => {
            let a = (v_max - ego_speed) / cfg.control_horizon;
            (a.clamp(-cfg.a_max_comfort, cfg.a_max_comfort), LongitudinalScenario::FreeRoad)
        }
        Some((gap, leader_speed)) => {
            let critical = cfg.critical_distance(ego_speed);
            if gap <= cfg.degenerate_gap {
                (-cfg.a_max_brake, LongitudinalScenario::EmergencyBrake)
            } else if gap <= critical {
                let a = -(ego_speed * ego_speed) / (2.0 * gap);
                (a.clamp(-cfg.a_max_brake, 0.0), LongitudinalScenario::EmergencyBrake)
            } else {
                let a = (leader_speed * leader_speed - ego_speed * ego_speed)
                    / (2.0 * (gap - critical));
                (a.clamp(-cfg.a_max_brake, cfg.a_max_comfort), LongitudinalScenario::Follow)
            }
        }
    };
    LongitudinalCommand {
        accel,
        v_desired: update_desired_velocity(ego_speed, accel, dt, v_max),
        scenario,
    }
}

/// Desired velocity after one step, clamped to [0, lane limit].
pub fn update_desired_velocity(speed: f64, accel: f64, dt: f64, v_max: f64) -> f64 {
    (speed + accel * dt).clamp(0.0, v_max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneTarget {
    pub lane: u8,
    pub y_target: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("no same-direction {side} neighbor of lane {lane}")]
    InvalidManeuver { lane: u8, side: &'static str },
}

/// Maps the chosen action to the next lane center. Lane changes require a
/// same-direction neighbor; absent one the maneuver is invalid (reachable
/// only with the shield off).
pub fn switch_box(
    current_lane: u8,
    action: Action,
    direction: Direction,
    track: &TrackConfig,
) -> Result<LaneTarget, ControlError> {
    let lane = match action {
        Action::LaneKeeping => current_lane,
        Action::LeftLaneChange => left_lane_of(current_lane, direction)
            .ok_or(ControlError::InvalidManeuver { lane: current_lane, side: "left" })?,
        Action::RightLaneChange => right_lane_of(current_lane, direction)
            .ok_or(ControlError::InvalidManeuver { lane: current_lane, side: "right" })?,
    };
    Ok(LaneTarget { lane, y_target: track.lane_center(lane) })
}

/// Target used when an invalid lane change is executed anyway (shield off):
/// one lane width beyond the current lane, off the legal band, so the
/// maneuver plays out as a road departure.
pub fn virtual_target(current_lane: u8, action: Action, direction: Direction, track: &TrackConfig) -> LaneTarget {
    let offset = match (action, direction) {
        (Action::LeftLaneChange, Direction::LeftToRight) => -1.0,
        (Action::LeftLaneChange, Direction::RightToLeft) => 1.0,
        (Action::RightLaneChange, Direction::LeftToRight) => 1.0,
        (Action::RightLaneChange, Direction::RightToLeft) => -1.0,
        (Action::LaneKeeping, _) => 0.0,
    };
    LaneTarget {
        lane: current_lane,
        y_target: track.lane_center(current_lane) + offset * track.lane_width,
    }
}

/// PI on lateral position error with integral windup and output limits.
#[derive(Clone, Debug)]
pub struct PiController {
    kp: f64,
    ki: f64,
    integral: f64,
    windup: f64,
    output_limit: f64,
}

impl PiController {
    pub fn new(cfg: &ControlConfig) -> Self {
        PiController {
            kp: cfg.kp,
            ki: cfg.ki,
            integral: 0.0,
            windup: cfg.integral_windup,
            output_limit: cfg.output_limit,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn update(&mut self, y: f64, y_target: f64, dt: f64) -> f64 {
        let error = y_target - y;
        self.integral = (self.integral + error * dt).clamp(-self.windup, self.windup);
        (self.kp * error + self.ki * self.integral).clamp(-self.output_limit, self.output_limit)
    }
}

/// Lateral maneuver latch: a lane change holds its target until the error
/// settles; new high-level decisions happen only between maneuvers. The
/// integral resets at maneuver start and completion.
pub struct LateralControl {
    pi: PiController,
    settle_tolerance: f64,
    active: Option<(Action, LaneTarget)>,
}

impl LateralControl {
    pub fn new(cfg: &ControlConfig) -> Self {
        LateralControl {
            pi: PiController::new(cfg),
            settle_tolerance: cfg.settle_tolerance,
            active: None,
        }
    }

    /// True when no maneuver is latched and the agent may decide.
    pub fn ready_for_decision(&self) -> bool {
        self.active.is_none()
    }

    pub fn active_action(&self) -> Option<Action> {
        self.active.map(|(a, _)| a)
    }

    pub fn begin(&mut self, action: Action, target: LaneTarget) {
        self.pi.reset();
        self.active = Some((action, target));
    }

    /// One frame of lateral control. Returns the lateral command and the
    /// action in force (the latched maneuver, or lane keeping).
    pub fn update(&mut self, ego_y: f64, keep_center: f64, dt: f64) -> (f64, Action) {
        let (target_y, action) = match self.active {
            Some((action, target)) => (target.y_target, action),
            None => (keep_center, Action::LaneKeeping),
        };
        let rate = self.pi.update(ego_y, target_y, dt);
        if let Some((_, target)) = self.active {
            if (ego_y - target.y_target).abs() < self.settle_tolerance {
                self.active = None;
                self.pi.reset();
            }
        }
        (rate, action)
    }
}

/// Closed-loop 1-D following simulation used by the controller safety
/// sweeps: constant-speed leader, ego driven by the longitudinal law.
/// Returns the minimum bumper gap observed over the horizon.
pub fn simulate_following(
    cfg: &ControlConfig,
    ego_v0: f64,
    leader_speed: f64,
    gap0: f64,
    v_max: f64,
    dt: f64,
    duration: f64,
) -> f64 {
    let mut ego_v = ego_v0;
    let mut gap = gap0;
    let mut min_gap = gap0;
    let steps = (duration / dt).ceil() as usize;
    for _ in 0..steps {
        let cmd = longitudinal_accel(cfg, ego_v, v_max, Some((gap, leader_speed)), dt);
        let new_v = (ego_v + cmd.accel * dt).clamp(0.0, v_max);
        // Relative motion: the leader advances, the ego closes.
        let ego_advance = ego_v * dt + 0.5 * cmd.accel * dt * dt;
        gap += leader_speed * dt - ego_advance;
        ego_v = new_v;
        if gap < min_gap {
            min_gap = gap;
        }
    }
    min_gap
}
