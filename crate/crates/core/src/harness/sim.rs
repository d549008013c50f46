use std::collections::VecDeque;

use crate::gait_model::{GaitModel, GaitParams, Leg, PedestrianState};
use crate::gait_model::emit_rope_sample;
use crate::gait_sense::{GaitEstimate, Recognizer, RecognizerConfig};
use crate::geom::{wrap_angle, Pose, Segment, Vec2};
use crate::guidance::{outer_leg, AudioCue, GuidanceCommand, SteeringController, Tension};
use crate::planner::{avoid_obstacles, path_blocked, plan_on_mask, lookahead_point, nearest_free, shortcut_path, BlockedMask, PlanError, PlannedPath, WaypointFollower};
use crate::rng::{gaussian, stream_rng, Stream};
use crate::world_sense::{
    dead_reckon, localize, mode_switch, update_occupancy_within, Gps, Imu, Lidar, LidarConfig, LocalizeConfig, NavEstimate,
    NavMode, OccupancyGrid, ScanFrame, WorldModel,
};

use super::metrics::{metrics_from_trace, RunMetrics};
use super::scenario::{map_grid, rasterize, ScenarioConfig, ScenarioKind, WalkerKind};
use super::trace::{Trace, TraceMeta, TraceRow};
use super::HarnessError;

/// A route the walker was given, and when.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub t: f64,
    pub path: PlannedPath,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub world: WorldModel,
    pub metrics: RunMetrics,
    pub trace: Trace,
    /// Map built while positioning by scan matching, if that happened.
    pub grid: Option<OccupancyGrid>,
    pub paths: Vec<PathRecord>,
}

/// Moving average of wrapped headings.
struct HeadingFilter {
    buf: VecDeque<f64>,
    cap: usize,
}

impl HeadingFilter {
    fn new(cap: usize) -> Self {
        Self { buf: VecDeque::with_capacity(cap), cap }
    }

    fn push(&mut self, h: f64) -> f64 {
        if self.buf.len() == self.cap {
            self.buf.pop_front();
        }
        self.buf.push_back(h);
        let mean_off = self.buf.iter().map(|&x| wrap_angle(x - h)).sum::<f64>() / self.buf.len() as f64;
        wrap_angle(h + mean_off)
    }
}

/// Follows a route by aiming at a point a fixed distance ahead on it; the
/// waypoint follower only decides when the route is done.
struct Tracker {
    follower: WaypointFollower,
    leg: usize,
}

impl Tracker {
    fn new(path: PlannedPath, capture_radius: f64) -> Result<Self, PlanError> {
        Ok(Self { follower: WaypointFollower::new(path, capture_radius)?, leg: 0 })
    }

    fn heading(&mut self, pose: &Pose, lookahead: f64) -> Result<f64, PlanError> {
        self.follower.target_heading(pose)?;
        let (leg, q) = lookahead_point(&self.follower.path, self.leg, pose.position(), lookahead).ok_or(PlanError::EmptyPath)?;
        self.leg = leg;
        Ok((q - pose.position()).angle())
    }
}

/// Where the walker is heading next.
enum Navigator {
    Fixed(f64),
    /// Holds a line through `origin`, aiming a lookahead distance along it.
    Line { origin: Vec2, heading: f64 },
    Planned {
        goal: Vec2,
        follower: Option<Tracker>,
        last_plan: f64,
    },
    Route(Tracker),
}

enum NavOutput {
    Heading(f64),
    Done,
}

impl Navigator {
    fn for_config(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        if cfg.kind == ScenarioKind::StraightWalk {
            return Ok(Navigator::Line { origin: cfg.start.position(), heading: cfg.target_heading() });
        }
        if cfg.kind.is_heading_task() {
            return Ok(Navigator::Fixed(cfg.target_heading()));
        }
        if !cfg.route.is_empty() {
            let path = PlannedPath::from_waypoints(cfg.route.clone());
            let f = Tracker::new(path, cfg.nav.capture_radius).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
            return Ok(Navigator::Route(f));
        }
        let goal = cfg.goal.ok_or_else(|| HarnessError::ScenarioInvalid("missing goal".into()))?;
        Ok(Navigator::Planned { goal, follower: None, last_plan: f64::NEG_INFINITY })
    }

    fn route(&self) -> Option<&PlannedPath> {
        match self {
            Navigator::Fixed(_) | Navigator::Line { .. } => None,
            Navigator::Planned { follower, .. } => follower.as_ref().map(|f| &f.follower.path),
            Navigator::Route(f) => Some(&f.follower.path),
        }
    }

    /// Updates the plan if due and returns the heading toward the route.
    fn step(
        &mut self,
        t: f64,
        pose: &Pose,
        grid: &OccupancyGrid,
        cfg: &ScenarioConfig,
        paths: &mut Vec<PathRecord>,
    ) -> NavOutput {
        match self {
            Navigator::Fixed(h) => NavOutput::Heading(*h),
            Navigator::Line { origin, heading } => {
                let offset = Vec2::from_angle(*heading).cross(pose.position() - *origin);
                NavOutput::Heading(*heading - (offset / cfg.nav.lookahead).atan())
            }
            Navigator::Route(f) => match f.heading(pose, cfg.nav.lookahead) {
                Ok(h) => NavOutput::Heading(h),
                Err(_) => NavOutput::Done,
            },
            Navigator::Planned { goal, follower, last_plan } => {
                let due = t - *last_plan >= cfg.nav.replan_interval - 1e-9;
                let mut mask = None;
                let need = match follower {
                    None => true,
                    Some(f) if due => {
                        let m = mask.insert(BlockedMask::inflate(grid, cfg.nav.inflation));
                        path_blocked(grid, m, &f.follower.path) || off_route(&f.follower.path, pose.position()) > cfg.nav.capture_radius
                    }
                    Some(_) => false,
                };
                if need {
                    let wide = BlockedMask::inflate(grid, cfg.nav.inflation + cfg.nav.preferred_margin);
                    let path = route_on(grid, &wide, pose.position(), *goal)
                        .or_else(|| {
                            let mask = mask.unwrap_or_else(|| BlockedMask::inflate(grid, cfg.nav.inflation));
                            route_on(grid, &mask, pose.position(), *goal)
                        })
                        .unwrap_or_else(|| PlannedPath::from_waypoints(vec![pose.position(), *goal]));
                    paths.push(PathRecord { t, path: path.clone() });
                    *follower = Tracker::new(path, cfg.nav.capture_radius).ok();
                    *last_plan = t;
                }
                match follower.as_mut().map(|f| f.heading(pose, cfg.nav.lookahead)) {
                    Some(Ok(h)) => NavOutput::Heading(h),
                    Some(Err(PlanError::PathExhausted)) => NavOutput::Done,
                    _ => NavOutput::Heading((*goal - pose.position()).angle()),
                }
            }
        }
    }
}

/// Shortcut route from `start` to `goal`. A start inside blocked space is
/// first moved to the nearest free cell within a meter.
fn route_on(grid: &OccupancyGrid, mask: &BlockedMask, start: Vec2, goal: Vec2) -> Option<PlannedPath> {
    match plan_on_mask(grid, mask, start, goal) {
        Ok(p) => Some(shortcut_path(grid, mask, &p)),
        Err(PlanError::StartBlocked) => {
            let free = nearest_free(grid, mask, start, 1.0)?;
            let p = shortcut_path(grid, mask, &plan_on_mask(grid, mask, free, goal).ok()?);
            let mut w = vec![start];
            w.extend(p.waypoints);
            Some(PlannedPath::from_waypoints(w))
        }
        Err(_) => None,
    }
}

/// Distance from `p` to the nearest leg of the route.
fn off_route(path: &PlannedPath, p: Vec2) -> f64 {
    match path.waypoints.as_slice() {
        [] => f64::INFINITY,
        [w] => w.dist(p),
        w => w
            .windows(2)
            .map(|s| Segment::new(s[0], s[1]).distance_to(p))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Stride modulations a person applies when steering on their own toward
/// `err`: the outer leg lengthens in proportion, the inner leg is left alone.
fn self_steer(err: f64, gain: f64, deadband: f64, mod_max: f64) -> (f64, f64) {
    if err.abs() <= deadband {
        return (0.0, 0.0);
    }
    let m = (gain * err.abs()).min(mod_max);
    match outer_leg(err) {
        Leg::Left => (m, 0.0),
        Leg::Right => (0.0, m),
    }
}

/// Modulation handed to the walker for one leg. A relaxed or damped rope
/// leaves whatever the leg is already doing.
fn actuate(cmd: &GuidanceCommand, state: &PedestrianState, leg: Leg) -> f64 {
    let m = cmd.modulation(leg);
    if cmd.tension(leg) == Tension::Assist && m > 0.0 {
        m
    } else {
        state.leg(leg).modulation
    }
}

/// Predicted pose between detected steps.
fn predicted(nav: &NavEstimate, est: &GaitEstimate, since_step: f64, cadence_prior: f64) -> Pose {
    let cadence = if est.cadence_hat > 0.0 { est.cadence_hat } else { cadence_prior };
    let travel = est.stride_hat * (cadence * since_step).min(1.0);
    let d = Vec2::from_angle(nav.pose_hat.heading) * travel;
    Pose::new(nav.pose_hat.x + d.x, nav.pose_hat.y + d.y, nav.pose_hat.heading)
}

/// Runs one scenario at a fixed 100 Hz-style step: walker kinematics, rope
/// encoders, gait recognition, sensing and mapping, navigation, then the
/// steering decision that acts on the next step.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, HarnessError> {
    let world = cfg.validate()?;
    let dt = cfg.dt;
    let model = GaitModel::new(GaitParams {
        w_hip: cfg.pedestrian.w_hip,
        mod_max: cfg.controller.mod_max,
        ..Default::default()
    })
    .map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
    let ped = &cfg.pedestrian;
    let mut state = model.initial_state(cfg.start.position(), cfg.start.heading, ped.base_stride, ped.cadence, ped.left_fraction);
    let mut recognizer = Recognizer::new(RecognizerConfig {
        geometry: cfg.rope,
        cadence_prior: ped.cadence,
        default_stride: ped.base_stride,
        ..Default::default()
    });
    let lidar = Lidar::new(LidarConfig { n_beams: cfg.sensors.lidar_beams, sigma: cfg.noise.lidar_sigma }, cfg.seed);
    let imu = Imu::new(cfg.noise.imu_sigma_deg, cfg.noise.imu_drift_deg_per_s, cfg.seed);
    let gps = Gps::new(cfg.noise.gps_sigma, cfg.seed);
    let loc_cfg = LocalizeConfig { beam_stride: cfg.sensors.localize_beam_stride, ..Default::default() };
    let mut controller = SteeringController::new(cfg.controller.clone()).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
    let mut filter = HeadingFilter::new(cfg.sensors.imu_window);

    let mut grid = map_grid(&world, cfg.sensors.grid_resolution);
    let mut scans_integrated = 0u64;
    let mut nav = NavEstimate::new(NavMode::IndoorSlam, cfg.start);
    let mut since_step = 0.0;
    // Heading offset learned from scan matching, added to the IMU reading.
    let mut heading_fix = 0.0;
    let mut last_scan: Option<ScanFrame> = None;

    // The cane walker follows a route on the true map with its true pose.
    let cane = cfg.walker == WalkerKind::CaneContact;
    let truth_grid = if cane && !cfg.kind.is_heading_task() && cfg.route.is_empty() {
        Some(rasterize(&world, cfg.sensors.grid_resolution))
    } else {
        None
    };
    let mut navigator = Navigator::for_config(cfg)?;
    let mut paths = Vec::new();

    let audio_period = ((cfg.baseline.audio_interval / dt).round() as u64).max(1);
    let mut human_target: Option<f64> = None;
    let mut audio_events = 0u64;
    let human_deadband = cfg.baseline.human_deadband_deg.to_radians();

    let mut cmd;
    let mut mods = (0.0, 0.0);
    let mut halted_until: Option<f64> = None;
    let mut pivot = 0.0;
    let mut true_steps = 0u64;
    let mut completed_at: Option<f64> = None;
    let mut rows = Vec::new();
    let n_ticks = (cfg.duration_cap / dt).round() as u64;
    let horizon_ticks = cfg.horizon.map(|h| (h / dt).round() as u64);
    let mut finished = false;

    for tick in 0..=n_ticks {
        let t = tick as f64 * dt;
        if tick > 0 {
            let (next, events) = model
                .advance(&state, dt, mods.0, mods.1)
                .map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
            // Walls are solid: a move that would cross one does not happen.
            let from = state.position;
            state = next;
            if world.segments.iter().any(|s| s.blocks_move(from, state.position)) {
                state.position = from;
            }
            for _ in &events {
                true_steps += 1;
                if cfg.noise.veer_sigma_deg > 0.0 {
                    let mut rng = stream_rng(cfg.seed, Stream::Veer, true_steps);
                    state.heading = wrap_angle(state.heading + gaussian(&mut rng, cfg.noise.veer_sigma_deg.to_radians()));
                }
            }
            if let Some(until) = halted_until {
                if t >= until - 1e-9 {
                    halted_until = None;
                    state.heading = wrap_angle(state.heading + pivot);
                    state.cadence = ped.cadence;
                }
            }
        }
        let true_pose = Pose::new(state.position.x, state.position.y, state.heading);
        if !world.bounds.contains(state.position) {
            return Err(HarnessError::ScenarioInvalid(format!("walker left the world at t={t:.2}")));
        }

        // Sensing.
        let sample = emit_rope_sample(&state, &cfg.rope, t, tick, cfg.noise.rope_sigma, cfg.seed);
        let est = recognizer.ingest(sample).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
        let heading_hat = wrap_angle(filter.push(imu.read(state.heading, t, tick)) + heading_fix);
        let steps_before = nav.step_count_used;
        nav = dead_reckon(&nav, &est, heading_hat);
        if nav.step_count_used != steps_before {
            since_step = 0.0;
        } else if tick > 0 {
            since_step += dt;
        }
        let mut pose_hat = predicted(&nav, &est, since_step, ped.cadence);

        if tick % cfg.sensors.gps_period == 0 {
            let fix = gps.fix(state.position, &world, tick);
            nav = mode_switch(&nav, fix.is_some());
            if let (NavMode::OutdoorGps, Some(f)) = (nav.mode, fix) {
                let g = cfg.nav.gps_gain;
                let blended = f * g + pose_hat.position() * (1.0 - g);
                nav.pose_hat.x += blended.x - pose_hat.x;
                nav.pose_hat.y += blended.y - pose_hat.y;
                pose_hat = predicted(&nav, &est, since_step, ped.cadence);
            }
        }

        if tick % cfg.sensors.lidar_period == 0 {
            let scan = lidar.scan(&true_pose, &world, tick, t).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
            if nav.mode == NavMode::IndoorSlam && scan.valid_beams() > 0 {
                if scans_integrated > 0 {
                    if let Ok((p, conf)) = localize(&grid, &pose_hat, &scan, &loc_cfg) {
                        nav.confidence = conf;
                        if conf >= cfg.sensors.localize_min_confidence {
                            heading_fix += cfg.sensors.heading_fix_gain * wrap_angle(p.heading - pose_hat.heading);
                            nav.pose_hat.x += p.x - pose_hat.x;
                            nav.pose_hat.y += p.y - pose_hat.y;
                            pose_hat = predicted(&nav, &est, since_step, ped.cadence);
                        }
                    }
                }
                update_occupancy_within(&mut grid, &pose_hat, &scan, cfg.sensors.map_range);
                scans_integrated += 1;
            }
            last_scan = Some(scan);
        }

        // Navigation.
        let nav_pose = if cane { true_pose } else { pose_hat };
        let nav_grid = truth_grid.as_ref().unwrap_or(&grid);
        let desired = match navigator.step(t, &nav_pose, nav_grid, cfg, &mut paths) {
            NavOutput::Heading(h) => h,
            NavOutput::Done => {
                finished = true;
                nav_pose.heading
            }
        };
        let own_heading = if cane { state.heading } else { heading_hat };
        let mut target = desired;
        let mut blocked = false;
        let mut imminent = false;
        if !cane && !cfg.kind.is_heading_task() {
            if let Some(scan) = &last_scan {
                let rel_desired = wrap_angle(desired - heading_hat);
                match avoid_obstacles(scan, rel_desired, cfg.nav.d_safe, cfg.nav.corridor) {
                    Ok(rel) => target = wrap_angle(heading_hat + rel),
                    Err(PlanError::Blocked) => blocked = true,
                    Err(_) => {}
                }
                let half = 0.5 * cfg.nav.stop_width;
                if !blocked && obstructed_ahead(scan, 0.0, cfg.nav.stop_distance, half) {
                    imminent = true;
                    pivot = clear_heading(scan, rel_desired, cfg.nav.stop_distance + 0.2, half + 0.05)
                        .unwrap_or_else(|| most_open_direction(scan));
                }
            }
        }

        // Steering decision for the next step.
        let err = wrap_angle(target - own_heading);
        let mut audio = AudioCue::None;
        cmd = GuidanceCommand::RELAXED;
        if halted_until.is_some() {
            audio = AudioCue::Obstacle;
        } else if (blocked || imminent) && !finished {
            audio = AudioCue::Obstacle;
            halted_until = Some(t + cfg.nav.halt_time);
            state.cadence = 0.0;
            if blocked {
                pivot = last_scan.as_ref().map_or(0.0, most_open_direction);
            }
        } else {
            match cfg.walker {
                WalkerKind::Guided => {
                    cmd = controller.steering_update(err, &est);
                    audio = cmd.audio;
                }
                WalkerKind::AudioOnly => {
                    if tick % audio_period == 0 {
                        let mut rng = stream_rng(cfg.seed, Stream::Audio, audio_events);
                        audio_events += 1;
                        let noise = gaussian(&mut rng, cfg.baseline.audio_exec_sigma_deg.to_radians());
                        human_target = Some(wrap_angle(state.heading + err + noise));
                        audio = if err > 0.0 { AudioCue::TurnLeft } else { AudioCue::TurnRight };
                    }
                }
                WalkerKind::CaneContact => {
                    let near = world.clearance(state.position) < cfg.baseline.cane_near_distance;
                    let v = if near { cfg.baseline.cane_near_speed } else { cfg.baseline.cane_open_speed };
                    state.cadence = v / ped.base_stride;
                    human_target = Some(target);
                }
            }
        }
        mods = match cfg.walker {
            WalkerKind::Guided => (actuate(&cmd, &state, Leg::Left), actuate(&cmd, &state, Leg::Right)),
            _ => match human_target {
                Some(h) if halted_until.is_none() => self_steer(
                    wrap_angle(h - state.heading),
                    cfg.baseline.human_gain,
                    human_deadband,
                    cfg.controller.mod_max,
                ),
                _ => (0.0, 0.0),
            },
        };

        rows.push(TraceRow {
            t,
            true_x: state.position.x,
            true_y: state.position.y,
            true_heading: state.heading,
            est_x: pose_hat.x,
            est_y: pose_hat.y,
            est_heading: heading_hat,
            mode: nav.mode.name().to_string(),
            l_left: sample.left_len,
            l_right: sample.right_len,
            phase_left: state.left.phase.name().to_string(),
            phase_right: state.right.phase.name().to_string(),
            tension_left: cmd.left_tension.name().to_string(),
            tension_right: cmd.right_tension.name().to_string(),
            mod_left: state.left.modulation,
            mod_right: state.right.modulation,
            audio: audio.name().to_string(),
            min_scan_range: world.clearance(state.position),
            step_count: true_steps,
        });

        // Termination.
        if let Some(h) = horizon_ticks {
            if tick >= h {
                break;
            }
        } else if cfg.kind.is_heading_task() {
            if completed_at.is_none() && wrap_angle(cfg.target_heading() - state.heading).abs() <= cfg.tolerance {
                completed_at = Some(t);
            }
            if completed_at.map_or(false, |c| t >= c + cfg.settle - 1e-9) {
                finished = true;
            }
        }
        if finished {
            break;
        }
    }

    let trace = Trace { meta: meta_for(cfg), rows };
    let metrics = metrics_from_trace(&trace);
    let outcome = RunOutcome {
        config: cfg.clone(),
        world,
        metrics,
        trace,
        grid: (scans_integrated > 0).then_some(grid),
        paths: if paths.is_empty() { navigator.route().map(|p| vec![PathRecord { t: 0.0, path: p.clone() }]).unwrap_or_default() } else { paths },
    };
    let done = finished || horizon_ticks.is_some();
    if done {
        Ok(outcome)
    } else {
        Err(HarnessError::TimedOut(Box::new(outcome)))
    }
}

/// True when a return lies in the strip `half_width` to either side of the
/// sensor-frame direction `dir` and no more than `ahead` along it.
fn obstructed_ahead(scan: &ScanFrame, dir: f64, ahead: f64, half_width: f64) -> bool {
    scan.ranges.iter().enumerate().any(|(i, &r)| {
        if !r.is_finite() {
            return false;
        }
        let (s, c) = (scan.beam_angle(i) - dir).sin_cos();
        c > 0.0 && r * c <= ahead && (r * s).abs() <= half_width
    })
}

/// Sensor-frame direction closest to `desired`, in 5° steps, whose strip
/// is free; `None` when every direction is obstructed.
fn clear_heading(scan: &ScanFrame, desired: f64, ahead: f64, half_width: f64) -> Option<f64> {
    let step = 5f64.to_radians();
    (0..=36).flat_map(|k| if k == 0 { vec![0] } else { vec![k, -k] }).find_map(|k| {
        let dir = wrap_angle(desired + k as f64 * step);
        (!obstructed_ahead(scan, dir, ahead, half_width)).then_some(dir)
    })
}

/// Sensor-frame angle of the longest beam within ±120° of forward; the
/// direction a halted walker turns toward.
fn most_open_direction(scan: &ScanFrame) -> f64 {
    let limit = 120f64.to_radians();
    let mut best = (f64::NEG_INFINITY, 0.0f64);
    for (i, &r) in scan.ranges.iter().enumerate() {
        let a = scan.beam_angle(i);
        if a.abs() > limit {
            continue;
        }
        let r = if r.is_finite() { r } else { f64::MAX };
        if r > best.0 || (r == best.0 && a.abs() < best.1.abs()) {
            best = (r, a);
        }
    }
    best.1
}

pub fn meta_for(cfg: &ScenarioConfig) -> TraceMeta {
    TraceMeta {
        scenario: cfg.name.clone(),
        kind: cfg.kind,
        walker: cfg.walker,
        seed: cfg.seed,
        dt: cfg.dt,
        duration_cap: cfg.duration_cap,
        target_heading: cfg.target_heading(),
        tolerance: cfg.tolerance,
        goal: if cfg.kind == ScenarioKind::OutdoorRoute { cfg.route.last().copied().or(cfg.goal) } else { cfg.goal },
        arrive_tolerance: cfg.arrive_tolerance,
        collision_threshold: cfg.nav.collision_threshold,
    }
}
