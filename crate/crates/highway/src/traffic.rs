//! Target-vehicle trajectory sources.
//!
//! Two interchangeable providers feed the environment: a loader for
//! delimited-text track recordings (highD-style column set) and a seeded
//! synthetic generator, so runs need no licensed data. Replayed vehicles
//! follow their recordings verbatim and never react to the ego.
//!
//! Track file format: comma-separated, one header row naming at least the
//! columns `frame, id, x, y, width, height, xVelocity, yVelocity, laneId`.
//! Positions are rectangle centers in meters; `width` is the longitudinal
//! extent (vehicle length) and `height` the lateral extent, following the
//! recording convention. Lane ids are remapped to the 1..=6 layout via an
//! optional sidecar file `<track>.lanes` with `src dst` pairs per line
//! (`#` comments); without a sidecar, lane ids must already be 1..=6.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{direction_of_lane, Direction, TrackConfig, VehicleState, NUM_LANES};

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("track file missing columns: {}", missing.join(", "))]
    Schema { missing: Vec<String> },
    #[error("track file has no data rows")]
    EmptyTrack,
    #[error("bad row at line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error("lane id {lane} outside 1..=6 and no sidecar mapping provided")]
    InvalidLane { lane: i64 },
    #[error("synthetic spec infeasible for lane {lane}: {detail}")]
    InfeasibleSpec { lane: u8, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Frame-indexed trajectory provider. Immutable once built; each environment
/// holds its own cursor.
pub trait TrafficSource: Send + Sync {
    /// Vehicles present at `index`; empty past the end of the recording.
    fn frame(&self, index: usize) -> &[VehicleState];
    fn frame_count(&self) -> usize;
    fn frame_rate(&self) -> f64;
    /// Longitudinal span covered by the source.
    fn extent(&self) -> (f64, f64);
}

/// Materialized frame table backing every provider.
pub struct FrameTable {
    frames: Vec<Vec<VehicleState>>,
    frame_rate: f64,
    extent: (f64, f64),
}

impl FrameTable {
    /// Builds a table from explicit frames (fixtures, custom sources).
    pub fn from_frames(
        frames: Vec<Vec<VehicleState>>,
        frame_rate: f64,
        extent: (f64, f64),
    ) -> FrameTable {
        FrameTable { frames, frame_rate, extent }
    }
}

static EMPTY_FRAME: [VehicleState; 0] = [];

impl TrafficSource for FrameTable {
    fn frame(&self, index: usize) -> &[VehicleState] {
        self.frames.get(index).map(Vec::as_slice).unwrap_or(&EMPTY_FRAME)
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    fn extent(&self) -> (f64, f64) {
        self.extent
    }
}

// ---------------------------------------------------------------------------
// Recorded-track loader
// ---------------------------------------------------------------------------

const REQUIRED_COLUMNS: [&str; 9] =
    ["frame", "id", "x", "y", "width", "height", "xVelocity", "yVelocity", "laneId"];

/// Loads a delimited-text track recording. Frames are grouped by the frame
/// column and renumbered to contiguous indices from 0 in ascending order.
pub fn load_track(path: &Path) -> Result<FrameTable, TrafficError> {
    let text = std::fs::read_to_string(path)?;
    let lane_map = load_lane_sidecar(path)?;

    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(TrafficError::EmptyTrack)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let missing: Vec<String> = REQUIRED_COLUMNS
        .iter()
        .filter(|c| !columns.contains(&&***c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(TrafficError::Schema { missing });
    }
    let col = |name: &str| columns.iter().position(|c| *c == name).unwrap();
    let (c_frame, c_id, c_x, c_y) = (col("frame"), col("id"), col("x"), col("y"));
    let (c_w, c_h) = (col("width"), col("height"));
    let (c_vx, c_vy, c_lane) = (col("xVelocity"), col("yVelocity"), col("laneId"));

    let mut by_frame: BTreeMap<i64, Vec<VehicleState>> = BTreeMap::new();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |idx: usize| -> Result<f64, TrafficError> {
            fields
                .get(idx)
                .ok_or_else(|| TrafficError::Row {
                    line: line_no + 1,
                    msg: format!("expected at least {} fields", idx + 1),
                })?
                .parse()
                .map_err(|e| TrafficError::Row { line: line_no + 1, msg: format!("{e}") })
        };
        let frame = get(c_frame)? as i64;
        let raw_lane = get(c_lane)? as i64;
        let lane = match lane_map.as_ref() {
            Some(map) => *map.get(&raw_lane).ok_or(TrafficError::InvalidLane { lane: raw_lane })?,
            None => {
                if (1..=NUM_LANES as i64).contains(&raw_lane) {
                    raw_lane as u8
                } else {
                    return Err(TrafficError::InvalidLane { lane: raw_lane });
                }
            }
        };
        let x = get(c_x)?;
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        by_frame.entry(frame).or_default().push(VehicleState {
            id: get(c_id)? as u64,
            lane,
            x,
            y: get(c_y)?,
            length: get(c_w)?,
            width: get(c_h)?,
            vx: get(c_vx)?,
            vy: get(c_vy)?,
            direction: direction_of_lane(lane),
        });
    }
    if by_frame.is_empty() {
        return Err(TrafficError::EmptyTrack);
    }
    let frames: Vec<Vec<VehicleState>> = by_frame.into_values().collect();
    Ok(FrameTable { frames, frame_rate: 25.0, extent: (x_lo, x_hi) })
}

fn load_lane_sidecar(track_path: &Path) -> Result<Option<BTreeMap<i64, u8>>, TrafficError> {
    let mut sidecar = track_path.as_os_str().to_owned();
    sidecar.push(".lanes");
    let sidecar = Path::new(&sidecar);
    if !sidecar.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(sidecar)?;
    let mut map = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<i64, TrafficError> {
            s.ok_or_else(|| TrafficError::Row {
                line: line_no + 1,
                msg: "expected 'src dst' pair".into(),
            })?
            .parse()
            .map_err(|e| TrafficError::Row { line: line_no + 1, msg: format!("{e}") })
        };
        let src = parse(parts.next())?;
        let dst = parse(parts.next())?;
        if !(1..=NUM_LANES as i64).contains(&dst) {
            return Err(TrafficError::InvalidLane { lane: dst });
        }
        map.insert(src, dst as u8);
    }
    Ok(Some(map))
}

/// Writes a frame table back out in the loader's column format.
pub fn save_track(table: &FrameTable, path: &Path) -> Result<(), TrafficError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "frame,id,x,y,width,height,xVelocity,yVelocity,laneId")?;
    for (frame, vehicles) in table.frames.iter().enumerate() {
        for v in vehicles {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                frame, v.id, v.x, v.y, v.length, v.width, v.vx, v.vy, v.lane
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

/// Seeded constant-velocity traffic: vehicles enter at each lane's upstream
/// edge following an exponential spawn process, honor a minimum spawn gap,
/// and never react to anything.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Vehicles per minute entering each lane (0 disables a lane).
    pub lane_rates_per_min: [f64; 6],
    /// Per-vehicle speed sampled uniformly from this range, m/s.
    pub lane_speed_ranges: [(f64, f64); 6],
    /// Minimum bumper-to-bumper gap at spawn time, meters.
    pub min_spawn_gap: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Longitudinal span populated with traffic.
    pub x_lo: f64,
    pub x_hi: f64,
    pub frame_rate: f64,
    /// Lane width used to place vehicles on lane centers.
    pub lane_width: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            lane_rates_per_min: [0.0; 6],
            // Narrow per-lane bands: outer lanes slowest, and little
            // intra-lane spread so queues do not get plowed into.
            lane_speed_ranges: [
                (23.5, 25.0),
                (27.5, 29.0),
                (31.5, 33.0),
                (31.5, 33.0),
                (27.5, 29.0),
                (23.5, 25.0),
            ],
            min_spawn_gap: 35.0,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
            x_lo: -60.0,
            x_hi: 900.0,
            frame_rate: 25.0,
            lane_width: 4.0,
        }
    }
}

impl SynthSpec {
    /// Multiplies every lane rate, used by the test harness to vary density.
    pub fn scaled(&self, factor: f64) -> SynthSpec {
        let mut spec = self.clone();
        for r in &mut spec.lane_rates_per_min {
            *r *= factor;
        }
        spec
    }
}

pub fn generate(spec: &SynthSpec, duration_frames: usize) -> Result<FrameTable, TrafficError> {
    let dt = 1.0 / spec.frame_rate;
    let span = spec.x_hi - spec.x_lo;

    // Analytic capacity check: a lane cannot sustain more than one vehicle
    // per (min gap + length) of road at its slowest speed.
    for lane in 1..=NUM_LANES {
        let rate = spec.lane_rates_per_min[(lane - 1) as usize];
        if rate <= 0.0 {
            continue;
        }
        let (v_lo, v_hi) = spec.lane_speed_ranges[(lane - 1) as usize];
        if v_lo <= 0.0 || v_hi < v_lo {
            return Err(TrafficError::InfeasibleSpec {
                lane,
                detail: format!("bad speed range ({v_lo}, {v_hi})"),
            });
        }
        let capacity_per_sec = v_lo / (spec.min_spawn_gap + spec.vehicle_length);
        if rate / 60.0 > capacity_per_sec {
            return Err(TrafficError::InfeasibleSpec {
                lane,
                detail: format!(
                    "rate {rate}/min exceeds capacity {:.2}/min at min gap {}",
                    capacity_per_sec * 60.0,
                    spec.min_spawn_gap
                ),
            });
        }
    }

    struct LaneSim {
        lane: u8,
        dir: Direction,
        rng: ChaCha12Rng,
        rate_per_sec: f64,
        speed_range: (f64, f64),
        vehicles: Vec<VehicleState>,
        time_to_spawn: f64,
    }

    let mut next_id: u64 = 1;
    let mut lanes: Vec<LaneSim> = Vec::new();
    for lane in 1..=NUM_LANES {
        let rate = spec.lane_rates_per_min[(lane - 1) as usize];
        if rate <= 0.0 {
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
        rng.set_stream(lane as u64);
        let dir = direction_of_lane(lane);
        let mut sim = LaneSim {
            lane,
            dir,
            rate_per_sec: rate / 60.0,
            speed_range: spec.lane_speed_ranges[(lane - 1) as usize],
            vehicles: Vec::new(),
            time_to_spawn: 0.0,
            rng,
        };

        // Pre-populate the span so frame 0 already carries steady traffic.
        let entry = if dir == Direction::LeftToRight { spec.x_lo } else { spec.x_hi };
        let lane_y = (lane as f64 - 0.5) * spec.lane_width;
        let mut dist = span;
        loop {
            let u: f64 = sim.rng.gen();
            let speed = sim.speed_range.0 + u * (sim.speed_range.1 - sim.speed_range.0);
            let u: f64 = sim.rng.gen();
            let headway_time = -(1.0 - u).ln() / sim.rate_per_sec;
            let headway = (speed * headway_time).max(spec.min_spawn_gap + spec.vehicle_length);
            dist -= headway;
            if dist <= 0.0 {
                break;
            }
            sim.vehicles.push(VehicleState {
                id: next_id,
                lane,
                x: entry + dir.sign() * dist,
                y: lane_y,
                length: spec.vehicle_length,
                width: spec.vehicle_width,
                vx: dir.sign() * speed,
                vy: 0.0,
                direction: dir,
            });
            next_id += 1;
        }
        let u: f64 = sim.rng.gen();
        sim.time_to_spawn = -(1.0 - u).ln() / sim.rate_per_sec;
        lanes.push(sim);
    }

    let mut frames: Vec<Vec<VehicleState>> = Vec::with_capacity(duration_frames);
    for _ in 0..duration_frames {
        let mut frame: Vec<VehicleState> = Vec::new();
        for sim in &mut lanes {
            frame.extend(sim.vehicles.iter().copied());
        }
        // Frame order: lanes ascending, oldest vehicle first within a lane.
        frames.push(frame);

        for sim in &mut lanes {
            for v in &mut sim.vehicles {
                v.x += v.vx * dt;
            }
            sim.vehicles
                .retain(|v| v.x >= spec.x_lo - 10.0 && v.x <= spec.x_hi + 10.0);

            sim.time_to_spawn -= dt;
            if sim.time_to_spawn <= 0.0 {
                let entry = if sim.dir == Direction::LeftToRight { spec.x_lo } else { spec.x_hi };
                // Spawn only once the previous vehicle has cleared the gap.
                let clear = sim.vehicles.iter().all(|v| {
                    (v.x - entry).abs() >= spec.min_spawn_gap + spec.vehicle_length
                });
                if clear {
                    let u: f64 = sim.rng.gen();
                    let speed =
                        sim.speed_range.0 + u * (sim.speed_range.1 - sim.speed_range.0);
                    sim.vehicles.push(VehicleState {
                        id: next_id,
                        lane: sim.lane,
                        x: entry,
                        y: (sim.lane as f64 - 0.5) * spec.lane_width,
                        length: spec.vehicle_length,
                        width: spec.vehicle_width,
                        vx: sim.dir.sign() * speed,
                        vy: 0.0,
                        direction: sim.dir,
                    });
                    next_id += 1;
                    let u: f64 = sim.rng.gen();
                    sim.time_to_spawn = -(1.0 - u).ln() / sim.rate_per_sec;
                }
                // Blocked spawns retry every frame until the gap clears.
            }
        }
    }

    Ok(FrameTable { frames, frame_rate: spec.frame_rate, extent: (spec.x_lo, spec.x_hi) })
}

// ---------------------------------------------------------------------------
// Direction mirroring
// ---------------------------------------------------------------------------

/// Reflects a source through the track midpoint: x about the extent center,
/// y about the road centerline, lane L -> 7-L, velocities negated. Applying
/// it twice returns the original frames. Used to build the right-to-left
/// generalization test from left-to-right data.
pub fn mirror_direction(source: &FrameTable, track: &TrackConfig) -> FrameTable {
    let (x_lo, x_hi) = source.extent;
    let height = track.road_height();
    let frames = source
        .frames
        .iter()
        .map(|frame| {
            frame
                .iter()
                .map(|v| {
                    let lane = 7 - v.lane;
                    VehicleState {
                        id: v.id,
                        lane,
                        x: x_lo + x_hi - v.x,
                        y: height - v.y,
                        length: v.length,
                        width: v.width,
                        vx: -v.vx,
                        vy: -v.vy,
                        direction: v.direction.opposite(),
                    }
                })
                .collect()
        })
        .collect();
    FrameTable { frames, frame_rate: source.frame_rate, extent: source.extent }
}
