//! Core domain types: vehicles, lanes, actions, and the track layout.
//!
//! The track family is fixed: six lanes numbered 1..=6 from the top of the
//! scene, y increasing downward. Lanes 1-3 carry right-to-left traffic,
//! lanes 4-6 left-to-right. "Left" and "right" are relative to the travel
//! direction: for left-to-right traffic screen-up (smaller lane index) is
//! left; for right-to-left traffic screen-down (larger lane index) is left.

use serde::{Deserialize, Serialize};

pub const NUM_LANES: u8 = 6;

/// Reserved vehicle id for the ego.
pub const EGO_ID: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl Direction {
    /// Sign of forward travel along x.
    pub fn sign(self) -> f64 {
        match self {
            Direction::LeftToRight => 1.0,
            Direction::RightToLeft => -1.0,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::LeftToRight => Direction::RightToLeft,
            Direction::RightToLeft => Direction::LeftToRight,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::LeftToRight => "left_to_right",
            Direction::RightToLeft => "right_to_left",
        }
    }
}

/// The three high-level maneuvers, indexed 0..=2 for the Q-network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    LaneKeeping,
    LeftLaneChange,
    RightLaneChange,
}

pub const NUM_ACTIONS: usize = 3;

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::LaneKeeping => 0,
            Action::LeftLaneChange => 1,
            Action::RightLaneChange => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Action> {
        match index {
            0 => Some(Action::LaneKeeping),
            1 => Some(Action::LeftLaneChange),
            2 => Some(Action::RightLaneChange),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::LaneKeeping => "lane_keeping",
            Action::LeftLaneChange => "left_lane_change",
            Action::RightLaneChange => "right_lane_change",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        match name {
            "lane_keeping" => Some(Action::LaneKeeping),
            "left_lane_change" => Some(Action::LeftLaneChange),
            "right_lane_change" => Some(Action::RightLaneChange),
            _ => None,
        }
    }
}

/// One road user at one frame. Positions are rectangle centers in meters;
/// velocities are signed (right-to-left traffic has negative vx).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub id: u64,
    pub lane: u8,
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
    pub vx: f64,
    pub vy: f64,
    pub direction: Direction,
}

impl VehicleState {
    /// Forward speed along the travel direction, non-negative for vehicles
    /// moving with their lane's flow.
    pub fn speed(&self) -> f64 {
        self.vx * self.direction.sign()
    }

    /// Axis-aligned rectangle overlap. Touching edges do not collide.
    pub fn overlaps(&self, other: &VehicleState) -> bool {
        (self.x - other.x).abs() < (self.length + other.length) / 2.0
            && (self.y - other.y).abs() < (self.width + other.width) / 2.0
    }

    /// Center-to-center Euclidean distance.
    pub fn center_distance(&self, other: &VehicleState) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Euclidean gap between the two rectangles (0 on contact or overlap).
    pub fn rect_gap(&self, other: &VehicleState) -> f64 {
        let gx = ((self.x - other.x).abs() - (self.length + other.length) / 2.0).max(0.0);
        let gy = ((self.y - other.y).abs() - (self.width + other.width) / 2.0).max(0.0);
        (gx * gx + gy * gy).sqrt()
    }
}

pub fn direction_of_lane(lane: u8) -> Direction {
    if lane <= 3 {
        Direction::RightToLeft
    } else {
        Direction::LeftToRight
    }
}

/// Same-direction left neighbor of `lane` for traffic moving in `dir`, or
/// None at the group edge.
pub fn left_lane_of(lane: u8, dir: Direction) -> Option<u8> {
    let candidate = match dir {
        Direction::LeftToRight => lane.checked_sub(1)?,
        Direction::RightToLeft => lane + 1,
    };
    (1..=NUM_LANES).contains(&candidate).then_some(candidate)?;
    (direction_of_lane(candidate) == dir).then_some(candidate)
}

/// Same-direction right neighbor, or None at the road edge.
pub fn right_lane_of(lane: u8, dir: Direction) -> Option<u8> {
    let candidate = match dir {
        Direction::LeftToRight => lane + 1,
        Direction::RightToLeft => lane.checked_sub(1)?,
    };
    (1..=NUM_LANES).contains(&candidate).then_some(candidate)?;
    (direction_of_lane(candidate) == dir).then_some(candidate)
}

/// Neighbor lane in raw geometry (ignoring direction), used by the shield's
/// sector partition: adjacent-left is one lane to the ego's left regardless
/// of that lane's flow direction.
pub fn geometric_left_of(lane: u8, dir: Direction) -> Option<u8> {
    let candidate = match dir {
        Direction::LeftToRight => lane.checked_sub(1)?,
        Direction::RightToLeft => lane + 1,
    };
    (1..=NUM_LANES).contains(&candidate).then_some(candidate)
}

pub fn geometric_right_of(lane: u8, dir: Direction) -> Option<u8> {
    let candidate = match dir {
        Direction::LeftToRight => lane + 1,
        Direction::RightToLeft => lane.checked_sub(1)?,
    };
    (1..=NUM_LANES).contains(&candidate).then_some(candidate)
}

/// Track geometry, timing, and per-lane speed limits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackConfig {
    /// Lane width in meters.
    pub lane_width: f64,
    /// Per-lane speed limit in m/s, indexed by lane-1.
    pub speed_limits: [f64; 6],
    /// Simulation step in seconds.
    pub dt: f64,
    /// Longitudinal progress at which an episode ends, meters.
    pub episode_length: f64,
    /// Total road length used to scale terminal penalties, meters.
    pub track_length: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            lane_width: 4.0,
            // Outer (rightmost-for-its-direction) lanes are slowest; the
            // layout is mirror-symmetric so mirrored runs see identical
            // limits.
            speed_limits: [27.8, 33.3, 38.9, 38.9, 33.3, 27.8],
            dt: 0.04,
            episode_length: 840.0,
            track_length: 840.0,
        }
    }
}

impl TrackConfig {
    pub fn lane_center(&self, lane: u8) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }

    /// Lane whose band contains `y`, switching at the geometric boundary.
    pub fn lane_of_y(&self, y: f64) -> Option<u8> {
        if y < 0.0 {
            return None;
        }
        let lane = (y / self.lane_width).floor() as i64 + 1;
        (1..=NUM_LANES as i64).contains(&lane).then_some(lane as u8)
    }

    pub fn speed_limit(&self, lane: u8) -> f64 {
        self.speed_limits[(lane - 1) as usize]
    }

    /// Legal y band (outermost lane boundaries) for one travel direction.
    pub fn legal_band(&self, dir: Direction) -> (f64, f64) {
        match dir {
            Direction::RightToLeft => (0.0, 3.0 * self.lane_width),
            Direction::LeftToRight => (3.0 * self.lane_width, 6.0 * self.lane_width),
        }
    }

    /// Total lateral extent of the road.
    pub fn road_height(&self) -> f64 {
        NUM_LANES as f64 * self.lane_width
    }
}

/// The world at one frame: ego plus all target vehicles.
#[derive(Clone, Debug)]
pub struct EnvSnapshot {
    pub ego: VehicleState,
    pub traffic: Vec<VehicleState>,
    pub frame_index: usize,
}
