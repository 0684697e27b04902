//! The safety shield: translate a scene snapshot into ground facts, evaluate
//! the highway rule base, and return the safe action set for the agent.
//!
//! A parallel geometric implementation ([`geometric_safe_set`]) computes the
//! same set directly from rectangle arithmetic without touching the rule
//! engine; the audit grid cross-checks the two on exhaustive micro-scenes.

use logic::{find_all, EngineError, FactStore, ParseError, RuleBase, Term};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    direction_of_lane, geometric_left_of, geometric_right_of, left_lane_of, right_lane_of,
    Action, Direction, EnvSnapshot, TrackConfig, VehicleState, EGO_ID, NUM_LANES,
};

/// The shipped rule file.
pub const HIGHWAY_RULES: &str = include_str!("../rules/highway.rules");

/// Floor applied to sector gaps so distances stay strictly positive even on
/// the contact frame.
const GAP_FLOOR: f64 = 1e-3;

/// The eight regions around the ego, in the canonical observation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    Front,
    FrontRight,
    Right,
    BackRight,
    Back,
    BackLeft,
    Left,
    FrontLeft,
}

pub const SECTORS: [Sector; 8] = [
    Sector::Front,
    Sector::FrontRight,
    Sector::Right,
    Sector::BackRight,
    Sector::Back,
    Sector::BackLeft,
    Sector::Left,
    Sector::FrontLeft,
];

impl Sector {
    pub fn index(self) -> usize {
        match self {
            Sector::Front => 0,
            Sector::FrontRight => 1,
            Sector::Right => 2,
            Sector::BackRight => 3,
            Sector::Back => 4,
            Sector::BackLeft => 5,
            Sector::Left => 6,
            Sector::FrontLeft => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sector::Front => "front",
            Sector::FrontRight => "front_right",
            Sector::Right => "right",
            Sector::BackRight => "back_right",
            Sector::Back => "back",
            Sector::BackLeft => "back_left",
            Sector::Left => "left",
            Sector::FrontLeft => "front_left",
        }
    }
}

/// Busy flags and nearest rectangle gaps per sector; empty sectors read as
/// the radar range.
#[derive(Clone, Copy, Debug)]
pub struct SectorOccupancy {
    pub busy: [bool; 8],
    pub nearest: [f64; 8],
}

impl SectorOccupancy {
    pub fn busy_at(&self, s: Sector) -> bool {
        self.busy[s.index()]
    }

    pub fn nearest_at(&self, s: Sector) -> f64 {
        self.nearest[s.index()]
    }
}

/// Nonempty subset of the action space; lane keeping is always a member.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SafeActionSet(u8);

impl SafeActionSet {
    pub fn lane_keeping_only() -> SafeActionSet {
        SafeActionSet(1 << Action::LaneKeeping.index())
    }

    pub fn all() -> SafeActionSet {
        SafeActionSet(0b111)
    }

    pub fn insert(&mut self, action: Action) {
        self.0 |= 1 << action.index();
    }

    pub fn contains(self, action: Action) -> bool {
        self.0 & (1 << action.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false // constructors guarantee lane keeping
    }

    pub fn actions(self) -> impl Iterator<Item = Action> {
        let mask = self.0;
        (0..3).filter_map(move |i| {
            if mask & (1 << i) != 0 {
                Action::from_index(i)
            } else {
                None
            }
        })
    }

    /// True when every member of `self` is also in `other`.
    pub fn subset_of(self, other: SafeActionSet) -> bool {
        self.0 & !other.0 == 0
    }
}

#[derive(Debug, Error)]
pub enum ShieldError {
    #[error("rule engine failure: {0}")]
    Engine(#[from] EngineError),
    #[error("rule file failed to parse: {0}")]
    Parse(#[from] ParseError),
    #[error("safe_actions produced unknown action atom: {0}")]
    UnknownAction(String),
    #[error("rule base omitted lane_keeping from the safe set")]
    MissingLaneKeeping,
    #[error("target vehicle {tv} at distance {distance:.1} is outside radar range {range:.1}")]
    OutOfRange { tv: u64, distance: f64, range: f64 },
}

/// Radar range and lane-change safety margins. The margin scales with ego
/// speed as `max(margin_base, margin_headway * v)`; setting both knobs to
/// zero reduces lane-change safety to "no vehicle alongside". Rear-diagonal
/// occupants closing faster than the ego must additionally be at least
/// `closing_speed * back_window` away, so nobody can reach the ego's new
/// lane slot while the maneuver is still in progress.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ShieldConfig {
    pub radar_range: f64,
    pub margin_base: f64,
    pub margin_headway: f64,
    pub back_window: f64,
}

impl Default for ShieldConfig {
    fn default() -> Self {
        ShieldConfig {
            radar_range: 100.0,
            margin_base: 10.0,
            margin_headway: 1.0,
            back_window: 3.0,
        }
    }
}

impl ShieldConfig {
    pub fn margin(&self, ego_speed: f64) -> f64 {
        self.margin_base.max(self.margin_headway * ego_speed)
    }
}

// ---------------------------------------------------------------------------
// Sector geometry (shared by observation building and the geometric oracle)
// ---------------------------------------------------------------------------

/// Classifies a target vehicle into the ego's sector partition. Vehicles two
/// or more lanes away map to no sector; the rules only consult adjacent
/// lanes. Errors if the vehicle is at or beyond radar range.
pub fn sector_of(
    ego: &VehicleState,
    tv: &VehicleState,
    radar_range: f64,
) -> Result<Option<Sector>, ShieldError> {
    let distance = ego.center_distance(tv);
    if distance >= radar_range {
        return Err(ShieldError::OutOfRange { tv: tv.id, distance, range: radar_range });
    }
    let gap = (tv.x - ego.x) * ego.direction.sign();
    if tv.lane == ego.lane {
        return Ok(if gap > 0.0 {
            Some(Sector::Front)
        } else if gap < 0.0 {
            Some(Sector::Back)
        } else {
            None
        });
    }
    let alongside = (tv.x - ego.x).abs() < (tv.length + ego.length) / 2.0;
    if Some(tv.lane) == geometric_left_of(ego.lane, ego.direction) {
        Ok(Some(if alongside {
            Sector::Left
        } else if gap > 0.0 {
            Sector::FrontLeft
        } else {
            Sector::BackLeft
        }))
    } else if Some(tv.lane) == geometric_right_of(ego.lane, ego.direction) {
        Ok(Some(if alongside {
            Sector::Right
        } else if gap > 0.0 {
            Sector::FrontRight
        } else {
            Sector::BackRight
        }))
    } else {
        Ok(None)
    }
}

/// Busy flags and nearest gaps over all in-range target vehicles.
pub fn occupancy(snapshot: &EnvSnapshot, cfg: &ShieldConfig) -> SectorOccupancy {
    let mut occ = SectorOccupancy { busy: [false; 8], nearest: [cfg.radar_range; 8] };
    for tv in &snapshot.traffic {
        if snapshot.ego.center_distance(tv) >= cfg.radar_range {
            continue;
        }
        let Ok(Some(sector)) = sector_of(&snapshot.ego, tv, cfg.radar_range) else {
            continue;
        };
        let gap = snapshot.ego.rect_gap(tv).max(GAP_FLOOR);
        let i = sector.index();
        occ.busy[i] = true;
        if gap < occ.nearest[i] {
            occ.nearest[i] = gap;
        }
    }
    occ
}

/// True when a target-side occupant forbids the lane change: anything
/// alongside, a diagonal occupant nearer than the margin, or a rear-diagonal
/// occupant closing fast enough to reach the ego within the back window.
fn side_blocked(
    snapshot: &EnvSnapshot,
    cfg: &ShieldConfig,
    alongside: Sector,
    front_diag: Sector,
    back_diag: Sector,
) -> bool {
    let ego = &snapshot.ego;
    let margin = cfg.margin(ego.speed());
    for tv in &snapshot.traffic {
        if ego.center_distance(tv) >= cfg.radar_range {
            continue;
        }
        let Ok(Some(sector)) = sector_of(ego, tv, cfg.radar_range) else {
            continue;
        };
        let gap = ego.rect_gap(tv);
        if sector == alongside {
            return true;
        }
        if sector == front_diag && gap < margin {
            return true;
        }
        if sector == back_diag {
            let tv_forward = tv.vx * ego.direction.sign();
            let closing = (tv_forward - ego.speed()).max(0.0);
            if gap < margin.max(closing * cfg.back_window) {
                return true;
            }
        }
    }
    false
}

/// Safe action set straight from rectangle arithmetic, with no rule engine
/// involvement. This is the audit's independent reference.
pub fn geometric_safe_set(snapshot: &EnvSnapshot, cfg: &ShieldConfig) -> SafeActionSet {
    let ego = &snapshot.ego;
    let mut set = SafeActionSet::lane_keeping_only();
    if left_lane_of(ego.lane, ego.direction).is_some()
        && !side_blocked(snapshot, cfg, Sector::Left, Sector::FrontLeft, Sector::BackLeft)
    {
        set.insert(Action::LeftLaneChange);
    }
    if right_lane_of(ego.lane, ego.direction).is_some()
        && !side_blocked(snapshot, cfg, Sector::Right, Sector::FrontRight, Sector::BackRight)
    {
        set.insert(Action::RightLaneChange);
    }
    set
}

// ---------------------------------------------------------------------------
// Fact emission and the rule-backed shield
// ---------------------------------------------------------------------------

fn pair(functor: &str, a: f64, b: f64) -> Term {
    Term::compound(functor, vec![Term::num(a), Term::num(b)])
}

fn vehicle_fact(v: &VehicleState) -> Term {
    Term::compound(
        "vehicle",
        vec![
            Term::num(v.id as f64),
            Term::num(v.lane as f64),
            pair("c", v.x, v.y),
            pair("c", v.length, v.width),
            pair("c", v.vx, v.vy),
        ],
    )
}

/// Clears the store and emits the scene: one `vehicle/5` + `direction/2` per
/// in-range vehicle (ego always included), plus `lane_count/1` and
/// `speed_limit/2`. Inclusion is strict: a vehicle exactly at radar range is
/// omitted.
pub fn emit_facts(
    snapshot: &EnvSnapshot,
    cfg: &ShieldConfig,
    track: &TrackConfig,
    fs: &mut FactStore,
) -> Result<(), ShieldError> {
    fs.clear();
    let mut emit_vehicle = |v: &VehicleState| -> Result<(), ShieldError> {
        fs.assert_fact(vehicle_fact(v))?;
        fs.assert_fact(Term::compound(
            "direction",
            vec![Term::num(v.id as f64), Term::atom(v.direction.name())],
        ))?;
        Ok(())
    };
    emit_vehicle(&snapshot.ego)?;
    for tv in &snapshot.traffic {
        if snapshot.ego.center_distance(tv) < cfg.radar_range {
            emit_vehicle(tv)?;
        }
    }
    fs.assert_fact(Term::compound("lane_count", vec![Term::num(NUM_LANES as f64)]))?;
    for lane in 1..=NUM_LANES {
        fs.assert_fact(Term::compound(
            "speed_limit",
            vec![Term::num(lane as f64), Term::num(track.speed_limit(lane))],
        ))?;
    }
    Ok(())
}

/// Parameter clauses prepended to the rule file, generated from the config
/// and the fixed lane layout.
fn preamble(cfg: &ShieldConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("ego_id({}).\n", EGO_ID));
    out.push_str(&format!("radar_range({}).\n", cfg.radar_range));
    out.push_str(&format!("margin_base({}).\n", cfg.margin_base));
    out.push_str(&format!("margin_headway({}).\n", cfg.margin_headway));
    out.push_str(&format!("back_window({}).\n", cfg.back_window));
    for lane in 1..=NUM_LANES {
        out.push_str(&format!(
            "lane_direction({}, {}).\n",
            lane,
            direction_of_lane(lane).name()
        ));
    }
    out
}

/// The rule-backed shield. Stateless given a snapshot; callers own the
/// `FactStore` so parallel evaluators do not share mutable state.
pub struct Shield {
    rule_base: RuleBase,
    cfg: ShieldConfig,
    track: TrackConfig,
    depth_limit: usize,
}

impl Shield {
    /// Builds a shield from rule text. The config preamble is parsed
    /// separately so error positions refer to the caller's own rule file.
    pub fn new(cfg: ShieldConfig, track: TrackConfig, rules: &str) -> Result<Shield, ShieldError> {
        let mut clauses = logic::parse_program(&preamble(&cfg))
            .expect("generated preamble always parses");
        clauses.extend(logic::parse_program(rules)?);
        let rule_base = RuleBase::from_clauses(clauses);
        Ok(Shield { rule_base, cfg, track, depth_limit: logic::DEFAULT_DEPTH_LIMIT })
    }

    pub fn with_default_rules(cfg: ShieldConfig, track: TrackConfig) -> Result<Shield, ShieldError> {
        Shield::new(cfg, track, HIGHWAY_RULES)
    }

    pub fn config(&self) -> &ShieldConfig {
        &self.cfg
    }

    pub fn rule_base(&self) -> &RuleBase {
        &self.rule_base
    }

    /// Emits facts for the snapshot and collects `safe_actions/1` via
    /// findall. Any engine error is fatal; a shield that silently degraded
    /// to lane keeping could mask rule bugs.
    pub fn safe_action_set(
        &self,
        snapshot: &EnvSnapshot,
        fs: &mut FactStore,
    ) -> Result<SafeActionSet, ShieldError> {
        emit_facts(snapshot, &self.cfg, &self.track, fs)?;
        let template = Term::var("A");
        let goal = Term::compound("safe_actions", vec![Term::var("A")]);
        let atoms = find_all(&template, &goal, &self.rule_base, fs, self.depth_limit)?;
        let mut set = SafeActionSet::lane_keeping_only();
        let mut saw_lane_keeping = false;
        for atom in atoms {
            let name = match &atom {
                Term::Atom(s) => s.as_str().to_string(),
                other => return Err(ShieldError::UnknownAction(other.to_string())),
            };
            let action = Action::from_name(&name)
                .ok_or_else(|| ShieldError::UnknownAction(name.clone()))?;
            if action == Action::LaneKeeping {
                saw_lane_keeping = true;
            }
            set.insert(action);
        }
        if !saw_lane_keeping {
            return Err(ShieldError::MissingLaneKeeping);
        }
        Ok(set)
    }
}

// ---------------------------------------------------------------------------
// Audit grid: rules vs. geometry on exhaustive micro-scenes
// ---------------------------------------------------------------------------

/// How a rule-set disagreement relates to the geometric reference: withheld
/// actions are merely over-conservative, extra actions are unsound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MismatchKind {
    OverConservative,
    Unsound,
    Mixed,
}

/// One audit scene and what the two implementations said about it.
#[derive(Debug)]
pub struct AuditMismatch {
    pub description: String,
    pub from_rules: Vec<Action>,
    pub from_geometry: Vec<Action>,
    pub kind: MismatchKind,
}

#[derive(Debug, Default)]
pub struct AuditReport {
    pub scenes: usize,
    pub agreements: usize,
    pub mismatches: Vec<AuditMismatch>,
}

impl AuditReport {
    pub fn agreement_fraction(&self) -> f64 {
        if self.scenes == 0 {
            1.0
        } else {
            self.agreements as f64 / self.scenes as f64
        }
    }
}

fn scene_vehicle(id: u64, lane: u8, x: f64, speed: f64, track: &TrackConfig) -> VehicleState {
    let dir = direction_of_lane(lane);
    VehicleState {
        id,
        lane,
        x,
        y: track.lane_center(lane),
        length: 4.5,
        width: 2.0,
        vx: dir.sign() * speed,
        vy: 0.0,
        direction: dir,
    }
}

/// Places one TV in the given sector around the ego at a bumper gap chosen
/// inside or outside the safety margin.
fn place_tv(
    ego: &VehicleState,
    sector: Sector,
    gap: f64,
    id: u64,
    track: &TrackConfig,
) -> Option<VehicleState> {
    let dir = ego.direction;
    let lane = match sector {
        Sector::Front | Sector::Back => Some(ego.lane),
        Sector::Left | Sector::FrontLeft | Sector::BackLeft => geometric_left_of(ego.lane, dir),
        Sector::Right | Sector::FrontRight | Sector::BackRight => {
            geometric_right_of(ego.lane, dir)
        }
    }?;
    let len = 4.5;
    let dx = gap + (ego.length + len) / 2.0;
    let along = match sector {
        Sector::Front | Sector::FrontLeft | Sector::FrontRight => dir.sign() * dx,
        Sector::Back | Sector::BackLeft | Sector::BackRight => -dir.sign() * dx,
        Sector::Left | Sector::Right => 0.0,
    };
    Some(scene_vehicle(id, lane, ego.x + along, 25.0, track))
}

/// Exhaustive micro-scene grid: for every legal (direction, lane) pair, every
/// subset of placeable sectors is occupied at a blocking gap, plus single-TV
/// scenes at a clear (beyond-margin) gap for each diagonal sector.
pub fn audit_scenes(track: &TrackConfig) -> Vec<(String, EnvSnapshot)> {
    let mut scenes = Vec::new();
    let ego_speed = 25.0; // margin = max(10, 1.0 * 25) = 25 m at defaults
    let blocking_gap = 15.0;
    let clear_gap = 40.0;

    for dir in [Direction::LeftToRight, Direction::RightToLeft] {
        let lanes: [u8; 3] = match dir {
            Direction::RightToLeft => [1, 2, 3],
            Direction::LeftToRight => [4, 5, 6],
        };
        for lane in lanes {
            let ego = scene_vehicle(EGO_ID, lane, 400.0, ego_speed, track);
            let placeable: Vec<Sector> = SECTORS
                .iter()
                .copied()
                .filter(|s| place_tv(&ego, *s, blocking_gap, 1, track).is_some())
                .collect();
            for mask in 0..(1u32 << placeable.len()) {
                let mut traffic = Vec::new();
                let mut names = Vec::new();
                for (bit, sector) in placeable.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        let id = traffic.len() as u64 + 1;
                        traffic.push(place_tv(&ego, *sector, blocking_gap, id, track).unwrap());
                        names.push(sector.name());
                    }
                }
                scenes.push((
                    format!("{} lane {} occupied[{}]", dir.name(), lane, names.join(",")),
                    EnvSnapshot { ego, traffic, frame_index: 0 },
                ));
            }
            // Far diagonal occupants: busy but beyond the margin.
            for sector in [
                Sector::FrontLeft,
                Sector::BackLeft,
                Sector::FrontRight,
                Sector::BackRight,
                Sector::Front,
                Sector::Back,
            ] {
                if let Some(tv) = place_tv(&ego, sector, clear_gap, 1, track) {
                    scenes.push((
                        format!("{} lane {} far[{}]", dir.name(), lane, sector.name()),
                        EnvSnapshot { ego, traffic: vec![tv], frame_index: 0 },
                    ));
                }
            }
            // Rear diagonals beyond the plain margin but closing fast (the
            // back-window rule must block) or falling behind (clear).
            for sector in [Sector::BackLeft, Sector::BackRight] {
                for (label, tv_speed) in [("fast", 35.0), ("slow", 20.0)] {
                    if let Some(mut tv) = place_tv(&ego, sector, 27.0, 1, track) {
                        tv.vx = tv.vx.signum() * tv_speed;
                        scenes.push((
                            format!("{} lane {} {label}[{}]", dir.name(), lane, sector.name()),
                            EnvSnapshot { ego, traffic: vec![tv], frame_index: 0 },
                        ));
                    }
                }
            }
        }
    }
    scenes
}

/// Runs the full grid through both implementations.
pub fn run_audit(shield: &Shield, track: &TrackConfig) -> Result<AuditReport, ShieldError> {
    let mut fs = FactStore::new();
    let mut report = AuditReport::default();
    for (description, snapshot) in audit_scenes(track) {
        let from_rules = shield.safe_action_set(&snapshot, &mut fs)?;
        let from_geometry = geometric_safe_set(&snapshot, shield.config());
        report.scenes += 1;
        if from_rules == from_geometry {
            report.agreements += 1;
        } else {
            let kind = match (
                from_rules.subset_of(from_geometry),
                from_geometry.subset_of(from_rules),
            ) {
                (true, false) => MismatchKind::OverConservative,
                (false, true) => MismatchKind::Unsound,
                _ => MismatchKind::Mixed,
            };
            report.mismatches.push(AuditMismatch {
                description,
                from_rules: from_rules.actions().collect(),
                from_geometry: from_geometry.actions().collect(),
                kind,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track() -> TrackConfig {
        TrackConfig::default()
    }

    fn ego_at(lane: u8, x: f64, speed: f64) -> VehicleState {
        scene_vehicle(EGO_ID, lane, x, speed, &track())
    }

    fn snapshot(ego: VehicleState, traffic: Vec<VehicleState>) -> EnvSnapshot {
        EnvSnapshot { ego, traffic, frame_index: 0 }
    }

    fn shield() -> Shield {
        Shield::with_default_rules(ShieldConfig::default(), track()).unwrap()
    }

    #[test]
    fn sector_classification_reference_cases() {
        let t = track();
        let ego = ego_at(5, 400.0, 28.0);
        // 30 m ahead, same lane, left-to-right.
        let tv = scene_vehicle(1, 5, 430.0, 28.0, &t);
        assert_eq!(sector_of(&ego, &tv, 100.0).unwrap(), Some(Sector::Front));
        // Alongside, one lane to the driving-direction left (lane 4).
        let tv = scene_vehicle(2, 4, 401.0, 28.0, &t);
        assert_eq!(sector_of(&ego, &tv, 100.0).unwrap(), Some(Sector::Left));
        // Right-to-left ego: 10 m behind in the right lane. Ahead means
        // smaller x, so behind is larger x; right for R2L is lane - 1.
        let ego = ego_at(2, 400.0, 28.0);
        let tv = scene_vehicle(3, 1, 410.0, 28.0, &t);
        assert_eq!(sector_of(&ego, &tv, 100.0).unwrap(), Some(Sector::BackRight));
        // Out of range errors.
        let tv = scene_vehicle(4, 2, 510.0, 28.0, &t);
        assert!(matches!(
            sector_of(&ego, &tv, 100.0),
            Err(ShieldError::OutOfRange { .. })
        ));
        // Two lanes away maps to no sector.
        let ego = ego_at(4, 400.0, 28.0);
        let tv = scene_vehicle(5, 6, 410.0, 28.0, &t);
        assert_eq!(sector_of(&ego, &tv, 100.0).unwrap(), None);
    }

    #[test]
    fn occupancy_tracks_nearest_gap() {
        let t = track();
        let ego = ego_at(5, 400.0, 28.0);
        let empty = occupancy(&snapshot(ego, vec![]), &ShieldConfig::default());
        assert!(empty.nearest.iter().all(|&d| d == 100.0));
        assert!(empty.busy.iter().all(|&b| !b));

        // Bumper gaps of 20 and 35 ahead in the same lane.
        let tv1 = scene_vehicle(1, 5, 400.0 + 20.0 + 4.5, 25.0, &t);
        let tv2 = scene_vehicle(2, 5, 400.0 + 35.0 + 4.5, 25.0, &t);
        let occ = occupancy(&snapshot(ego, vec![tv1, tv2]), &ShieldConfig::default());
        assert!(occ.busy_at(Sector::Front));
        assert!((occ.nearest_at(Sector::Front) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn emit_facts_counts_and_range_boundary() {
        let t = track();
        let cfg = ShieldConfig::default();
        let mut fs = FactStore::new();
        let ego = ego_at(5, 400.0, 28.0);

        emit_facts(&snapshot(ego, vec![]), &cfg, &t, &mut fs).unwrap();
        assert_eq!(fs.facts("vehicle", 5).count(), 1);

        // Two in range, one at 1.5 R, one exactly at R (excluded: strict).
        let traffic = vec![
            scene_vehicle(1, 5, 430.0, 25.0, &t),
            scene_vehicle(2, 4, 380.0, 30.0, &t),
            scene_vehicle(3, 5, 400.0 + 150.0, 25.0, &t),
            scene_vehicle(4, 5, 500.0, 25.0, &t), // center distance exactly 100
        ];
        emit_facts(&snapshot(ego, traffic), &cfg, &t, &mut fs).unwrap();
        assert_eq!(fs.facts("vehicle", 5).count(), 3);
        assert_eq!(fs.facts("direction", 2).count(), 3);
        assert_eq!(fs.facts("lane_count", 1).count(), 1);
        assert_eq!(fs.facts("speed_limit", 2).count(), 6);
    }

    #[test]
    fn empty_road_safe_sets_by_lane() {
        let s = shield();
        let mut fs = FactStore::new();
        // Middle lane: everything allowed.
        let set = s.safe_action_set(&snapshot(ego_at(5, 400.0, 28.0), vec![]), &mut fs).unwrap();
        assert_eq!(set, SafeActionSet::all());
        // Leftmost same-direction lane (4 for left-to-right): no left change.
        let set = s.safe_action_set(&snapshot(ego_at(4, 400.0, 28.0), vec![]), &mut fs).unwrap();
        assert!(set.contains(Action::LaneKeeping));
        assert!(!set.contains(Action::LeftLaneChange));
        assert!(set.contains(Action::RightLaneChange));
        // Rightmost lane 6: no right change.
        let set = s.safe_action_set(&snapshot(ego_at(6, 400.0, 28.0), vec![]), &mut fs).unwrap();
        assert!(set.contains(Action::LeftLaneChange));
        assert!(!set.contains(Action::RightLaneChange));
    }

    #[test]
    fn alongside_blocks_lane_change() {
        let t = track();
        let s = shield();
        let mut fs = FactStore::new();
        let ego = ego_at(5, 400.0, 28.0);
        // TV alongside in the left-adjacent lane; right stays clear.
        let tv = scene_vehicle(1, 4, 402.0, 28.0, &t);
        let set = s.safe_action_set(&snapshot(ego, vec![tv]), &mut fs).unwrap();
        assert!(set.contains(Action::LaneKeeping));
        assert!(!set.contains(Action::LeftLaneChange));
        assert!(set.contains(Action::RightLaneChange));
    }

    #[test]
    fn margin_blocks_near_diagonal_but_not_far() {
        let t = track();
        let s = shield();
        let mut fs = FactStore::new();
        let ego = ego_at(5, 400.0, 25.0); // margin = 25 m
        // Front-left occupant at 15 m bumper gap: blocks.
        let near = place_tv(&ego, Sector::FrontLeft, 15.0, 1, &t).unwrap();
        let set = s.safe_action_set(&snapshot(ego, vec![near]), &mut fs).unwrap();
        assert!(!set.contains(Action::LeftLaneChange));
        // Same occupant at 40 m: beyond margin, left is safe again.
        let far = place_tv(&ego, Sector::FrontLeft, 40.0, 1, &t).unwrap();
        let set = s.safe_action_set(&snapshot(ego, vec![far]), &mut fs).unwrap();
        assert!(set.contains(Action::LeftLaneChange));
    }

    #[test]
    fn zero_margin_matches_alongside_only_semantics() {
        let t = track();
        let cfg = ShieldConfig { margin_base: 0.0, margin_headway: 0.0, ..Default::default() };
        let s = Shield::with_default_rules(cfg, t.clone()).unwrap();
        let mut fs = FactStore::new();
        let ego = ego_at(5, 400.0, 25.0);
        let near = place_tv(&ego, Sector::FrontLeft, 2.0, 1, &t).unwrap();
        let set = s.safe_action_set(&snapshot(ego, vec![near]), &mut fs).unwrap();
        assert!(set.contains(Action::LeftLaneChange));
        let beside = place_tv(&ego, Sector::Left, 0.0, 1, &t).unwrap();
        let set = s.safe_action_set(&snapshot(ego, vec![beside]), &mut fs).unwrap();
        assert!(!set.contains(Action::LeftLaneChange));
    }

    #[test]
    fn audit_grid_agrees_everywhere() {
        let t = track();
        let report = run_audit(&shield(), &t).unwrap();
        assert!(report.scenes >= 200, "grid too small: {}", report.scenes);
        for m in report.mismatches.iter().take(5) {
            eprintln!(
                "{}: rules {:?} vs geometry {:?}",
                m.description, m.from_rules, m.from_geometry
            );
        }
        assert_eq!(report.agreements, report.scenes);
    }

    #[test]
    fn removing_a_vehicle_never_shrinks_the_set() {
        let t = track();
        let s = shield();
        let mut fs = FactStore::new();
        let scenes = audit_scenes(&t);
        for (_, snap) in scenes.iter().filter(|(_, s)| !s.traffic.is_empty()).take(200) {
            let full = s.safe_action_set(snap, &mut fs).unwrap();
            for drop_idx in 0..snap.traffic.len() {
                let mut reduced = snap.clone();
                reduced.traffic.remove(drop_idx);
                let set = s.safe_action_set(&reduced, &mut fs).unwrap();
                assert!(
                    full.subset_of(set),
                    "removing a TV shrank the safe set: {full:?} -> {set:?}"
                );
            }
        }
    }

    #[test]
    fn audit_classifies_missing_safety_rule_as_over_conservative() {
        let t = track();
        // Break left_is_safe's derivation: left changes are never emitted,
        // which must read as over-conservatism rather than unsoundness.
        let pruned = HIGHWAY_RULES.replace(
            "left_is_valid, left_is_safe,",
            "left_is_valid, left_is_safe, never_derivable,",
        );
        let s = Shield::new(ShieldConfig::default(), t.clone(), &pruned).unwrap();
        let report = run_audit(&s, &t).unwrap();
        assert!(!report.mismatches.is_empty());
        assert!(report
            .mismatches
            .iter()
            .all(|m| m.kind == MismatchKind::OverConservative));
        assert!(report
            .mismatches
            .iter()
            .all(|m| !m.from_rules.contains(&Action::LeftLaneChange)));
    }

    #[test]
    fn malformed_rule_file_reports_location() {
        match Shield::new(ShieldConfig::default(), track(), "p :- q(") {
            Err(ShieldError::Parse(parse)) => {
                let msg = parse.to_string();
                assert!(msg.contains("syntax error"), "unexpected message: {msg}");
            }
            Err(other) => panic!("expected a parse error, got {other}"),
            Ok(_) => panic!("malformed rules must not parse"),
        }
    }

    #[test]
    fn validity_never_points_off_direction() {
        let t = track();
        let s = shield();
        let mut fs = FactStore::new();
        for (_, snap) in audit_scenes(&t) {
            let set = s.safe_action_set(&snap, &mut fs).unwrap();
            if set.contains(Action::LeftLaneChange) {
                assert!(left_lane_of(snap.ego.lane, snap.ego.direction).is_some());
            }
            if set.contains(Action::RightLaneChange) {
                assert!(right_lane_of(snap.ego.lane, snap.ego.direction).is_some());
            }
        }
    }
}
