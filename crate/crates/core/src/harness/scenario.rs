use crate::gait_model::RopeGeometry;
use crate::geom::{Bounds, ConvexPolygon, Pose, Segment, Vec2};
use crate::guidance::ControllerConfig;
use crate::planner::{plan_path, DEFAULT_INFLATION};
use crate::rng::{stream_rng, Stream};
use crate::world_sense::{OccupancyGrid, WorldModel};

use std::ops::Range;

use rand::Rng;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Turn90,
    StraightWalk,
    SteerToAngle,
    ObstacleCourse,
    Hallway,
    OutdoorRoute,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Turn90,
        ScenarioKind::StraightWalk,
        ScenarioKind::SteerToAngle,
        ScenarioKind::ObstacleCourse,
        ScenarioKind::Hallway,
        ScenarioKind::OutdoorRoute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Turn90 => "Turn90",
            ScenarioKind::StraightWalk => "StraightWalk",
            ScenarioKind::SteerToAngle => "SteerToAngle",
            ScenarioKind::ObstacleCourse => "ObstacleCourse",
            ScenarioKind::Hallway => "Hallway",
            ScenarioKind::OutdoorRoute => "OutdoorRoute",
        }
    }

    pub fn from_name(s: &str) -> Option<ScenarioKind> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    /// Seeds covered by the built-in suite of this kind.
    pub fn default_seeds(self) -> Range<u64> {
        match self {
            ScenarioKind::Turn90 => 0..1,
            ScenarioKind::StraightWalk => 0..20,
            ScenarioKind::SteerToAngle => 0..10,
            ScenarioKind::ObstacleCourse => 0..100,
            ScenarioKind::Hallway | ScenarioKind::OutdoorRoute => 0..5,
        }
    }

    /// Tasks judged by heading rather than by reaching a place.
    pub fn is_heading_task(self) -> bool {
        matches!(self, ScenarioKind::Turn90 | ScenarioKind::StraightWalk | ScenarioKind::SteerToAngle)
    }
}

/// Who steers the walker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalkerKind {
    Guided,
    AudioOnly,
    CaneContact,
}

impl WalkerKind {
    pub fn name(self) -> &'static str {
        match self {
            WalkerKind::Guided => "Guided",
            WalkerKind::AudioOnly => "AudioOnly",
            WalkerKind::CaneContact => "CaneContact",
        }
    }

    pub fn from_name(s: &str) -> Option<WalkerKind> {
        [WalkerKind::Guided, WalkerKind::AudioOnly, WalkerKind::CaneContact]
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianParams {
    pub base_stride: f64,
    /// Steps per second.
    pub cadence: f64,
    pub w_hip: f64,
    /// Initial gait-cycle fraction of the left leg.
    pub left_fraction: f64,
}

impl Default for PedestrianParams {
    fn default() -> Self {
        Self { base_stride: 0.45, cadence: 0.8 / 0.45, w_hip: 0.30, left_fraction: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    /// Encoder noise, meters.
    pub rope_sigma: f64,
    pub lidar_sigma: f64,
    pub gps_sigma: f64,
    pub imu_sigma_deg: f64,
    pub imu_drift_deg_per_s: f64,
    /// Unintended heading change per step, degrees.
    pub veer_sigma_deg: f64,
}

impl NoiseParams {
    pub fn zero() -> Self {
        Self {
            rope_sigma: 0.0,
            lidar_sigma: 0.0,
            gps_sigma: 0.0,
            imu_sigma_deg: 0.0,
            imu_drift_deg_per_s: 0.0,
            veer_sigma_deg: 0.0,
        }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            rope_sigma: 0.0005,
            lidar_sigma: 0.02,
            gps_sigma: 0.8,
            imu_sigma_deg: 1.0,
            imu_drift_deg_per_s: 0.1,
            veer_sigma_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorParams {
    pub lidar_beams: usize,
    /// Ticks between LIDAR sweeps.
    pub lidar_period: u64,
    /// Ticks between GPS readings.
    pub gps_period: u64,
    /// IMU moving-average length, samples.
    pub imu_window: usize,
    pub grid_resolution: f64,
    pub localize_beam_stride: usize,
    /// Scan-match results below this confidence are ignored.
    pub localize_min_confidence: f64,
    /// Fraction of each scan-matched heading offset fed back into the IMU
    /// heading; 0 keeps the raw IMU heading.
    pub heading_fix_gain: f64,
    /// Returns farther than this are left out of the map, meters.
    pub map_range: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            lidar_beams: 360,
            lidar_period: 10,
            gps_period: 100,
            imu_window: 5,
            grid_resolution: 0.1,
            localize_beam_stride: 4,
            localize_min_confidence: 0.2,
            heading_fix_gain: 0.2,
            map_range: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavParams {
    pub inflation: f64,
    /// Extra inflation tried first when planning; dropped if no route
    /// exists with it.
    pub preferred_margin: f64,
    pub d_safe: f64,
    pub corridor: f64,
    pub capture_radius: f64,
    /// Distance along the route to the point being steered for, meters.
    pub lookahead: f64,
    /// Shortest time between replans, seconds.
    pub replan_interval: f64,
    /// Weight of a GPS fix in the position blend.
    pub gps_gain: f64,
    /// Clearance below which a tick counts as contact, meters.
    pub collision_threshold: f64,
    /// Time spent stopped after every heading is blocked, seconds.
    pub halt_time: f64,
    /// Length of the strip ahead that triggers a stop when anything is in
    /// it, meters.
    pub stop_distance: f64,
    /// Width of that strip, meters.
    pub stop_width: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        Self {
            inflation: DEFAULT_INFLATION,
            preferred_margin: 0.15,
            d_safe: 1.0,
            corridor: 0.6,
            capture_radius: 0.5,
            lookahead: 1.0,
            replan_interval: 1.0,
            gps_gain: 0.2,
            collision_threshold: 0.25,
            halt_time: 1.0,
            stop_distance: 0.7,
            stop_width: 0.56,
        }
    }
}

/// Parameters of the two comparison walkers.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    /// Seconds between audio cues.
    pub audio_interval: f64,
    /// Execution noise of a cued correction, degrees.
    pub audio_exec_sigma_deg: f64,
    /// Self-steering gain, modulation per radian.
    pub human_gain: f64,
    pub human_deadband_deg: f64,
    pub cane_near_speed: f64,
    pub cane_open_speed: f64,
    /// Walls closer than this slow the cane walker, meters.
    pub cane_near_distance: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            audio_interval: 2.0,
            audio_exec_sigma_deg: 4.0,
            human_gain: 0.25,
            human_deadband_deg: 0.5,
            cane_near_speed: 0.55,
            cane_open_speed: 0.65,
            cane_near_distance: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldPreset {
    Empty,
    Hallway,
    ObstacleCourse,
    Outdoor,
}

impl WorldPreset {
    pub fn name(self) -> &'static str {
        match self {
            WorldPreset::Empty => "empty",
            WorldPreset::Hallway => "hallway",
            WorldPreset::ObstacleCourse => "obstacle_course",
            WorldPreset::Outdoor => "outdoor",
        }
    }

    pub fn from_name(s: &str) -> Option<WorldPreset> {
        [WorldPreset::Empty, WorldPreset::Hallway, WorldPreset::ObstacleCourse, WorldPreset::Outdoor]
            .into_iter()
            .find(|p| p.name().replace('_', "").eq_ignore_ascii_case(&s.replace('_', "")))
    }
}

/// World description: a preset plus any extra geometry. Seeded presets are
/// generated from the run seed.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub preset: WorldPreset,
    pub bounds: Option<Bounds>,
    pub segments: Vec<Segment>,
    pub gps_regions: Vec<ConvexPolygon>,
    pub obstacles_min: usize,
    pub obstacles_max: usize,
}

impl WorldSpec {
    pub fn preset(preset: WorldPreset) -> Self {
        Self { preset, bounds: None, segments: Vec::new(), gps_regions: Vec::new(), obstacles_min: 5, obstacles_max: 8 }
    }

    pub fn build(&self, seed: u64) -> Result<WorldModel, HarnessError> {
        let mut w = match self.preset {
            WorldPreset::Empty => WorldModel::empty(Bounds::new(Vec2::new(-30.0, -30.0), Vec2::new(30.0, 30.0))),
            WorldPreset::Hallway => hallway_world(),
            WorldPreset::ObstacleCourse => obstacle_course_world(seed, self.obstacles_min, self.obstacles_max)?,
            WorldPreset::Outdoor => outdoor_world(),
        };
        if let Some(b) = self.bounds {
            w.bounds = b;
        }
        w.segments.extend(self.segments.iter().copied());
        w.gps_regions.extend(self.gps_regions.iter().cloned());
        w.validate().map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
        Ok(w)
    }
}

/// 30 m corridor, 2 m wide, with three wall-mounted obstructions.
pub fn hallway_world() -> WorldModel {
    let mut w = WorldModel::empty(Bounds::new(Vec2::new(-1.0, -2.0), Vec2::new(31.0, 2.0)));
    w.add_box(Vec2::new(0.0, -1.0), Vec2::new(30.0, 1.0));
    w.add_box(Vec2::new(8.0, 0.6), Vec2::new(8.6, 1.0));
    w.add_box(Vec2::new(17.0, -1.0), Vec2::new(17.5, -0.6));
    w.add_box(Vec2::new(24.0, 0.5), Vec2::new(24.4, 1.0));
    w
}

/// Start, goal and room size of the obstacle course.
pub const COURSE_START: Pose = Pose::new(0.8, 3.0, 0.0);
pub const COURSE_GOAL: Vec2 = Vec2::new(9.2, 3.0);
const COURSE_ROOM: (f64, f64) = (10.0, 6.0);

/// A 10 × 6 m room holding 5 to 8 random boxes, regenerated until the goal
/// is reachable with the default inflation.
pub fn obstacle_course_world(seed: u64, min: usize, max: usize) -> Result<WorldModel, HarnessError> {
    if min > max {
        return Err(HarnessError::ScenarioInvalid("obstacle count range is empty".into()));
    }
    let (rw, rh) = COURSE_ROOM;
    for attempt in 0..64u64 {
        let mut rng = stream_rng(seed, Stream::World, attempt);
        let n = rng.gen_range(min..=max);
        let mut boxes: Vec<(Vec2, Vec2)> = Vec::new();
        let mut tries = 0;
        while boxes.len() < n && tries < 2000 {
            tries += 1;
            let sx = rng.gen_range(0.3..0.8);
            let sy = rng.gen_range(0.3..0.8);
            let cx = rng.gen_range(2.0..8.0);
            let cy = rng.gen_range(0.6 + sy / 2.0..rh - 0.6 - sy / 2.0);
            let lo = Vec2::new(cx - sx / 2.0, cy - sy / 2.0);
            let hi = Vec2::new(cx + sx / 2.0, cy + sy / 2.0);
            let near = |p: Vec2| {
                let dx = (lo.x - p.x).max(p.x - hi.x).max(0.0);
                let dy = (lo.y - p.y).max(p.y - hi.y).max(0.0);
                (dx * dx + dy * dy).sqrt() < 1.2
            };
            if near(COURSE_START.position()) || near(COURSE_GOAL) {
                continue;
            }
            let gap = 1.0;
            let overlaps = boxes.iter().any(|(a, b)| {
                lo.x < b.x + gap && hi.x + gap > a.x && lo.y < b.y + gap && hi.y + gap > a.y
            });
            if !overlaps {
                boxes.push((lo, hi));
            }
        }
        if boxes.len() < n {
            continue;
        }
        let mut w = WorldModel::empty(Bounds::new(Vec2::new(-0.5, -0.5), Vec2::new(rw + 0.5, rh + 0.5)));
        w.add_box(Vec2::new(0.0, 0.0), Vec2::new(rw, rh));
        for (lo, hi) in boxes {
            w.add_box(lo, hi);
        }
        let grid = rasterize(&w, 0.1);
        if plan_path(&grid, COURSE_START.position(), COURSE_GOAL, DEFAULT_INFLATION).is_ok() {
            return Ok(w);
        }
    }
    Err(HarnessError::ScenarioInvalid(format!("no solvable obstacle course for seed {seed}")))
}

/// A 10 m indoor corridor opening onto an open area with GPS coverage.
pub fn outdoor_world() -> WorldModel {
    let mut w = WorldModel::empty(Bounds::new(Vec2::new(-1.0, -30.0), Vec2::new(70.0, 30.0)));
    let seg = |a: (f64, f64), b: (f64, f64)| Segment::new(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1));
    w.segments.push(seg((0.0, -1.0), (0.0, 1.0)));
    w.segments.push(seg((0.0, 1.0), (10.0, 1.0)));
    w.segments.push(seg((0.0, -1.0), (10.0, -1.0)));
    w.segments.push(seg((10.0, 1.0), (10.0, 8.0)));
    w.segments.push(seg((10.0, -1.0), (10.0, -8.0)));
    w.add_box(Vec2::new(25.85, 2.35), Vec2::new(26.15, 2.65));
    w.add_box(Vec2::new(39.85, 8.35), Vec2::new(40.15, 8.65));
    w.gps_regions.push(ConvexPolygon::rect(Vec2::new(10.5, -30.0), Vec2::new(70.0, 30.0)));
    w
}

pub fn outdoor_route() -> Vec<Vec2> {
    [(10.0, 0.0), (20.0, 0.0), (30.0, 10.0), (45.0, 10.0), (55.0, 0.0)]
        .into_iter()
        .map(|(x, y)| Vec2::new(x, y))
        .collect()
}

/// Empty map around `world`. The extra half cell of margin puts cell
/// centers, rather than cell edges, on round coordinates, so a wall drawn on
/// a round coordinate falls inside one row of cells.
pub fn map_grid(world: &WorldModel, resolution: f64) -> OccupancyGrid {
    OccupancyGrid::covering(&world.bounds, resolution, 0.5 + 0.5 * resolution)
}

/// Ground-truth occupancy: cells touched by a segment are saturated
/// occupied, all others free.
pub fn rasterize(world: &WorldModel, resolution: f64) -> OccupancyGrid {
    let mut g = map_grid(world, resolution);
    g.log_odds.fill(-5.0);
    for s in &world.segments {
        let n = (s.length() / (0.25 * resolution)).ceil().max(1.0) as usize;
        for k in 0..=n {
            let p = s.a + (s.b - s.a) * (k as f64 / n as f64);
            if let Some((c, r)) = g.cell_of(p) {
                g.set(c, r, 5.0);
            }
        }
    }
    g
}

/// Heading changes of the steering suite, degrees.
pub const STEER_TARGETS_DEG: [f64; 9] = [30.0, -30.0, 60.0, -60.0, 90.0, -90.0, 120.0, -120.0, 180.0];

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: ScenarioKind,
    pub walker: WalkerKind,
    pub seed: u64,
    /// Seconds of simulated time before the run is abandoned.
    pub duration_cap: f64,
    /// Fixed-length runs stop here without timing out, seconds.
    pub horizon: Option<f64>,
    /// Extra time simulated after a turn completes, seconds.
    pub settle: f64,
    pub dt: f64,
    pub start: Pose,
    /// Heading change requested relative to the start heading, radians.
    pub target_angle: f64,
    /// Heading tolerance, radians.
    pub tolerance: f64,
    pub goal: Option<Vec2>,
    /// Waypoints given to the walker instead of a planned route.
    pub route: Vec<Vec2>,
    /// Arrival radius around the goal, meters.
    pub arrive_tolerance: f64,
    pub pedestrian: PedestrianParams,
    pub rope: RopeGeometry,
    pub controller: ControllerConfig,
    pub noise: NoiseParams,
    pub sensors: SensorParams,
    pub nav: NavParams,
    pub baseline: BaselineParams,
    pub world: WorldSpec,
}

impl ScenarioConfig {
    /// Built-in defaults for a scenario kind.
    pub fn default_for(kind: ScenarioKind) -> Self {
        let mut c = ScenarioConfig {
            name: kind.name().to_lowercase(),
            kind,
            walker: WalkerKind::Guided,
            seed: 0,
            duration_cap: 60.0,
            horizon: None,
            settle: 0.5,
            dt: 0.01,
            start: Pose::default(),
            target_angle: 0.0,
            tolerance: 5f64.to_radians(),
            goal: None,
            route: Vec::new(),
            arrive_tolerance: 1.0,
            pedestrian: PedestrianParams::default(),
            rope: RopeGeometry::default(),
            controller: ControllerConfig::default(),
            noise: NoiseParams::default(),
            sensors: SensorParams::default(),
            nav: NavParams::default(),
            baseline: BaselineParams::default(),
            world: WorldSpec::preset(WorldPreset::Empty),
        };
        match kind {
            ScenarioKind::Turn90 => {
                c.target_angle = 90f64.to_radians();
                c.duration_cap = 6.0;
                c.noise = NoiseParams::zero();
            }
            ScenarioKind::SteerToAngle => {
                c.target_angle = 60f64.to_radians();
                c.horizon = Some(10.0);
                c.duration_cap = 10.0;
                c.noise.imu_drift_deg_per_s = 0.0;
            }
            ScenarioKind::StraightWalk => {
                c.horizon = Some(15.0);
                c.duration_cap = 15.0;
                c.noise.imu_drift_deg_per_s = 0.0;
                c.noise.veer_sigma_deg = 1.0;
            }
            ScenarioKind::ObstacleCourse => {
                c.start = COURSE_START;
                c.goal = Some(COURSE_GOAL);
                c.world = WorldSpec::preset(WorldPreset::ObstacleCourse);
            }
            ScenarioKind::Hallway => {
                c.start = Pose::new(1.0, 0.0, 0.0);
                c.goal = Some(Vec2::new(29.0, 0.0));
                c.duration_cap = 120.0;
                c.world = WorldSpec::preset(WorldPreset::Hallway);
            }
            ScenarioKind::OutdoorRoute => {
                c.start = Pose::new(1.0, 0.0, 0.0);
                c.route = outdoor_route();
                c.goal = c.route.last().copied();
                c.arrive_tolerance = 1.5;
                c.duration_cap = 200.0;
                c.world = WorldSpec::preset(WorldPreset::Outdoor);
            }
        }
        c
    }

    /// Absolute heading the walker should end up holding.
    pub fn target_heading(&self) -> f64 {
        crate::geom::wrap_angle(self.start.heading + self.target_angle)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_walker(&self, walker: WalkerKind) -> Self {
        Self { walker, ..self.clone() }
    }

    pub fn validate(&self) -> Result<WorldModel, HarnessError> {
        let bad = |m: &str| Err(HarnessError::ScenarioInvalid(m.to_string()));
        if !(self.duration_cap > 0.0) {
            return bad("duration_cap must be positive");
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return bad("dt must lie in (0, 0.1]");
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h <= self.duration_cap) {
                return bad("horizon must lie in (0, duration_cap]");
            }
        }
        let p = &self.pedestrian;
        if !(p.base_stride > 0.0 && p.cadence > 0.0 && p.w_hip > 0.0) {
            return bad("pedestrian parameters must be positive");
        }
        self.controller.validate().map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
        if self.controller.mod_max >= 1.0 {
            return bad("mod_max must be below 1");
        }
        let n = &self.noise;
        let sigmas = [n.rope_sigma, n.lidar_sigma, n.gps_sigma, n.imu_sigma_deg, n.veer_sigma_deg];
        if sigmas.iter().any(|s| !(*s >= 0.0)) || !n.imu_drift_deg_per_s.is_finite() {
            return bad("noise parameters must be non-negative");
        }
        let s = &self.sensors;
        if s.lidar_beams < 2 || s.lidar_period == 0 || s.gps_period == 0 || s.imu_window == 0 || !(s.grid_resolution > 0.0)
            || !(0.0..=1.0).contains(&s.heading_fix_gain)
            || !(s.map_range > 0.0)
        {
            return bad("sensor parameters out of range");
        }
        if !(self.nav.capture_radius > 0.0 && self.nav.lookahead > 0.0 && self.arrive_tolerance > 0.0 && self.tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !self.kind.is_heading_task() && self.goal.is_none() && self.route.is_empty() {
            return bad("navigation scenarios need a goal or a route");
        }
        let world = self.world.build(self.seed)?;
        if !world.bounds.contains(self.start.position()) {
            return bad("start lies outside the world bounds");
        }
        if world.clearance(self.start.position()) <= self.nav.collision_threshold {
            return bad("start is in contact with an obstacle");
        }
        Ok(world)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_validates() {
        for k in ScenarioKind::ALL {
            let c = ScenarioConfig::default_for(k);
            assert!(c.validate().is_ok(), "{k:?}");
        }
    }

    #[test]
    fn obstacle_courses_vary_with_seed_and_respect_counts() {
        let a = obstacle_course_world(1, 5, 8).unwrap();
        let b = obstacle_course_world(2, 5, 8).unwrap();
        assert_ne!(a, b);
        for seed in 0..30 {
            let w = obstacle_course_world(seed, 5, 8).unwrap();
            let boxes = (w.segments.len() - 4) / 4;
            assert!((5..=8).contains(&boxes), "seed {seed}: {boxes}");
            assert_eq!(w, obstacle_course_world(seed, 5, 8).unwrap());
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(ScenarioKind::from_name(k.name()), Some(k));
        }
    }
}
