//! Scenario file format, version 1.
//!
//! ```text
//! gaitguide-scenario v1
//! # comment
//! [scenario]
//! kind = Turn90
//! seed = 3
//! [world]
//! preset = empty
//! box = 2, -1, 3, 1
//! ```
//!
//! The first meaningful line is the version header. `[scenario] kind` picks
//! the built-in defaults; every other key overrides one field, in file
//! order. Angles take a `_deg` key for degrees or a bare key for radians.

use crate::geom::{wrap_angle, Bounds, ConvexPolygon, Pose, Segment, Vec2};

use super::scenario::{ScenarioConfig, ScenarioKind, WalkerKind, WorldPreset, WorldSpec};
use super::HarnessError;

pub const SCENARIO_MAGIC: &str = "gaitguide-scenario v1";

fn num(v: &str) -> Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' is not finite"))
    }
}

fn int(v: &str) -> Result<u64, String> {
    v.trim().parse().map_err(|_| format!("'{v}' is not a non-negative integer"))
}

fn list(v: &str, n: usize) -> Result<Vec<f64>, String> {
    let xs: Vec<f64> = v.split(',').map(num).collect::<Result<_, _>>()?;
    if xs.len() != n {
        return Err(format!("expected {n} comma-separated numbers, found {}", xs.len()));
    }
    Ok(xs)
}

fn point(v: &str) -> Result<Vec2, String> {
    let p = list(v, 2)?;
    Ok(Vec2::new(p[0], p[1]))
}

fn points(v: &str) -> Result<Vec<Vec2>, String> {
    v.split(';').filter(|s| !s.trim().is_empty()).map(point).collect()
}

fn opt_point(v: &str) -> Result<Option<Vec2>, String> {
    if v.trim() == "none" {
        Ok(None)
    } else {
        point(v).map(Some)
    }
}

/// Sets one `section.key` of `cfg`.
fn apply_entry(cfg: &mut ScenarioConfig, section: &str, key: &str, v: &str) -> Result<(), String> {
    let deg = |v: &str| num(v).map(f64::to_radians);
    match (section, key) {
        ("scenario", "name") => cfg.name = v.trim().to_string(),
        ("scenario", "kind") => {
            let k = ScenarioKind::from_name(v.trim()).ok_or_else(|| format!("unknown kind '{v}'"))?;
            if k != cfg.kind {
                return Err("kind must be set before any other key".into());
            }
        }
        ("scenario", "walker") => cfg.walker = WalkerKind::from_name(v.trim()).ok_or_else(|| format!("unknown walker '{v}'"))?,
        ("scenario", "seed") => cfg.seed = int(v)?,
        ("scenario", "duration_cap") => cfg.duration_cap = num(v)?,
        ("scenario", "horizon") => cfg.horizon = if v.trim() == "none" { None } else { Some(num(v)?) },
        ("scenario", "settle") => cfg.settle = num(v)?,
        ("scenario", "dt") => cfg.dt = num(v)?,

        ("start", "x") => cfg.start.x = num(v)?,
        ("start", "y") => cfg.start.y = num(v)?,
        ("start", "heading") => cfg.start.heading = wrap_angle(num(v)?),
        ("start", "heading_deg") => cfg.start.heading = wrap_angle(deg(v)?),

        ("task", "target") => cfg.target_angle = num(v)?,
        ("task", "target_deg") => cfg.target_angle = deg(v)?,
        ("task", "tolerance") => cfg.tolerance = num(v)?,
        ("task", "tolerance_deg") => cfg.tolerance = deg(v)?,
        ("task", "goal") => cfg.goal = opt_point(v)?,
        ("task", "route") => cfg.route = points(v)?,
        ("task", "arrive_tolerance") => cfg.arrive_tolerance = num(v)?,

        ("pedestrian", "base_stride") => cfg.pedestrian.base_stride = num(v)?,
        ("pedestrian", "cadence") => cfg.pedestrian.cadence = num(v)?,
        ("pedestrian", "speed") => cfg.pedestrian.cadence = num(v)? / cfg.pedestrian.base_stride,
        ("pedestrian", "w_hip") => cfg.pedestrian.w_hip = num(v)?,
        ("pedestrian", "left_fraction") => cfg.pedestrian.left_fraction = num(v)?,

        ("rope", "l1") => cfg.rope.l1 = point(v)?,
        ("rope", "l2") => cfg.rope.l2 = point(v)?,

        ("controller", "kp") => cfg.controller.kp = num(v)?,
        ("controller", "deadband") => cfg.controller.deadband = num(v)?,
        ("controller", "deadband_deg") => cfg.controller.deadband = deg(v)?,
        ("controller", "audio_threshold") => cfg.controller.audio_threshold = num(v)?,
        ("controller", "audio_threshold_deg") => cfg.controller.audio_threshold = deg(v)?,
        ("controller", "mod_max") => cfg.controller.mod_max = num(v)?,
        ("controller", "onset_guard") => cfg.controller.onset_guard = num(v)?,
        ("controller", "release_margin") => cfg.controller.release_margin = num(v)?,

        ("noise", "rope_sigma") => cfg.noise.rope_sigma = num(v)?,
        ("noise", "lidar_sigma") => cfg.noise.lidar_sigma = num(v)?,
        ("noise", "gps_sigma") => cfg.noise.gps_sigma = num(v)?,
        ("noise", "imu_sigma_deg") => cfg.noise.imu_sigma_deg = num(v)?,
        ("noise", "imu_drift_deg_per_s") => cfg.noise.imu_drift_deg_per_s = num(v)?,
        ("noise", "veer_sigma_deg") => cfg.noise.veer_sigma_deg = num(v)?,

        ("sensors", "lidar_beams") => cfg.sensors.lidar_beams = int(v)? as usize,
        ("sensors", "lidar_period") => cfg.sensors.lidar_period = int(v)?,
        ("sensors", "gps_period") => cfg.sensors.gps_period = int(v)?,
        ("sensors", "imu_window") => cfg.sensors.imu_window = int(v)? as usize,
        ("sensors", "grid_resolution") => cfg.sensors.grid_resolution = num(v)?,
        ("sensors", "localize_beam_stride") => cfg.sensors.localize_beam_stride = int(v)? as usize,
        ("sensors", "localize_min_confidence") => cfg.sensors.localize_min_confidence = num(v)?,
        ("sensors", "heading_fix_gain") => cfg.sensors.heading_fix_gain = num(v)?,
        ("sensors", "map_range") => cfg.sensors.map_range = num(v)?,

        ("nav", "inflation") => cfg.nav.inflation = num(v)?,
        ("nav", "preferred_margin") => cfg.nav.preferred_margin = num(v)?,
        ("nav", "d_safe") => cfg.nav.d_safe = num(v)?,
        ("nav", "corridor") => cfg.nav.corridor = num(v)?,
        ("nav", "capture_radius") => cfg.nav.capture_radius = num(v)?,
        ("nav", "lookahead") => cfg.nav.lookahead = num(v)?,
        ("nav", "replan_interval") => cfg.nav.replan_interval = num(v)?,
        ("nav", "gps_gain") => cfg.nav.gps_gain = num(v)?,
        ("nav", "collision_threshold") => cfg.nav.collision_threshold = num(v)?,
        ("nav", "halt_time") => cfg.nav.halt_time = num(v)?,
        ("nav", "stop_distance") => cfg.nav.stop_distance = num(v)?,
        ("nav", "stop_width") => cfg.nav.stop_width = num(v)?,

        ("baseline", "audio_interval") => cfg.baseline.audio_interval = num(v)?,
        ("baseline", "audio_exec_sigma_deg") => cfg.baseline.audio_exec_sigma_deg = num(v)?,
        ("baseline", "human_gain") => cfg.baseline.human_gain = num(v)?,
        ("baseline", "human_deadband_deg") => cfg.baseline.human_deadband_deg = num(v)?,
        ("baseline", "cane_near_speed") => cfg.baseline.cane_near_speed = num(v)?,
        ("baseline", "cane_open_speed") => cfg.baseline.cane_open_speed = num(v)?,
        ("baseline", "cane_near_distance") => cfg.baseline.cane_near_distance = num(v)?,

        ("world", "preset") => {
            let p = WorldPreset::from_name(v.trim()).ok_or_else(|| format!("unknown world preset '{v}'"))?;
            cfg.world.preset = p;
        }
        ("world", "bounds") => {
            let b = list(v, 4)?;
            cfg.world.bounds = Some(Bounds::new(Vec2::new(b[0], b[1]), Vec2::new(b[2], b[3])));
        }
        ("world", "segment") => {
            let s = list(v, 4)?;
            cfg.world.segments.push(Segment::new(Vec2::new(s[0], s[1]), Vec2::new(s[2], s[3])));
        }
        ("world", "box") => {
            let b = list(v, 4)?;
            let c = [(b[0], b[1]), (b[2], b[1]), (b[2], b[3]), (b[0], b[3])];
            for i in 0..4 {
                let (a, e) = (c[i], c[(i + 1) % 4]);
                cfg.world.segments.push(Segment::new(Vec2::new(a.0, a.1), Vec2::new(e.0, e.1)));
            }
        }
        ("world", "gps_region") => cfg.world.gps_regions.push(ConvexPolygon::new(points(v)?)),
        ("world", "obstacles_min") => cfg.world.obstacles_min = int(v)? as usize,
        ("world", "obstacles_max") => cfg.world.obstacles_max = int(v)? as usize,
        ("world", "clear") => {
            if v.trim() == "true" {
                cfg.world = WorldSpec::preset(cfg.world.preset);
            }
        }
        _ => return Err(format!("unknown key '{section}.{key}'")),
    }
    Ok(())
}

/// Parses a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let perr = |line: usize, reason: String| HarnessError::ScenarioParse { line, reason };
    let mut entries = Vec::new();
    let mut section = String::new();
    let mut seen_magic = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !seen_magic {
            if line != SCENARIO_MAGIC {
                return Err(perr(line_no, format!("expected header '{SCENARIO_MAGIC}'")));
            }
            seen_magic = true;
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| perr(line_no, "expected 'key = value'".into()))?;
        if section.is_empty() {
            return Err(perr(line_no, "key outside of any [section]".into()));
        }
        entries.push((line_no, section.clone(), k.trim().to_string(), v.trim().to_string()));
    }
    if !seen_magic {
        return Err(perr(1, format!("expected header '{SCENARIO_MAGIC}'")));
    }
    let (kind_line, kind) = entries
        .iter()
        .find(|(_, s, k, _)| s == "scenario" && k == "kind")
        .map(|(l, _, _, v)| (*l, v.clone()))
        .ok_or_else(|| perr(0, "missing [scenario] kind".into()))?;
    let kind = ScenarioKind::from_name(&kind).ok_or_else(|| perr(kind_line, format!("unknown kind '{kind}'")))?;
    let mut cfg = ScenarioConfig::default_for(kind);
    for (line, s, k, v) in &entries {
        apply_entry(&mut cfg, s, k, v).map_err(|r| perr(*line, r))?;
    }
    Ok(cfg)
}

/// Applies a `section.key=value` override.
pub fn apply_override(cfg: &mut ScenarioConfig, entry: &str) -> Result<(), HarnessError> {
    let bad = |r: String| HarnessError::ScenarioParse { line: 0, reason: format!("override '{entry}': {r}") };
    let (path, v) = entry.split_once('=').ok_or_else(|| bad("expected section.key=value".into()))?;
    let (s, k) = path.trim().split_once('.').ok_or_else(|| bad("expected section.key=value".into()))?;
    if s == "scenario" && k == "kind" {
        let kind = ScenarioKind::from_name(v.trim()).ok_or_else(|| bad(format!("unknown kind '{v}'")))?;
        if kind != cfg.kind {
            return Err(bad("the scenario kind cannot be overridden".into()));
        }
        return Ok(());
    }
    apply_entry(cfg, s.trim(), k.trim(), v).map_err(bad)
}

fn pt(p: Vec2) -> String {
    format!("{}, {}", p.x, p.y)
}

/// Writes `cfg` in the v1 format. Parsing the result gives back `cfg`
/// exactly.
pub fn to_scenario_text(cfg: &ScenarioConfig) -> String {
    let mut o = String::new();
    let mut lines: Vec<(String, String)> = Vec::new();
    let sec = |name: &str, lines: &mut Vec<(String, String)>| lines.push((format!("[{name}]"), String::new()));
    sec("scenario", &mut lines);
    lines.push(("name".into(), cfg.name.clone()));
    lines.push(("kind".into(), cfg.kind.name().into()));
    lines.push(("walker".into(), cfg.walker.name().into()));
    lines.push(("seed".into(), cfg.seed.to_string()));
    lines.push(("duration_cap".into(), cfg.duration_cap.to_string()));
    lines.push(("horizon".into(), cfg.horizon.map_or("none".into(), |h| h.to_string())));
    lines.push(("settle".into(), cfg.settle.to_string()));
    lines.push(("dt".into(), cfg.dt.to_string()));
    sec("start", &mut lines);
    let Pose { x, y, heading } = cfg.start;
    lines.push(("x".into(), x.to_string()));
    lines.push(("y".into(), y.to_string()));
    lines.push(("heading".into(), heading.to_string()));
    sec("task", &mut lines);
    lines.push(("target".into(), cfg.target_angle.to_string()));
    lines.push(("tolerance".into(), cfg.tolerance.to_string()));
    lines.push(("goal".into(), cfg.goal.map_or("none".into(), pt)));
    lines.push(("route".into(), cfg.route.iter().map(|&p| pt(p)).collect::<Vec<_>>().join("; ")));
    lines.push(("arrive_tolerance".into(), cfg.arrive_tolerance.to_string()));
    sec("pedestrian", &mut lines);
    let p = &cfg.pedestrian;
    lines.push(("base_stride".into(), p.base_stride.to_string()));
    lines.push(("cadence".into(), p.cadence.to_string()));
    lines.push(("w_hip".into(), p.w_hip.to_string()));
    lines.push(("left_fraction".into(), p.left_fraction.to_string()));
    sec("rope", &mut lines);
    lines.push(("l1".into(), pt(cfg.rope.l1)));
    lines.push(("l2".into(), pt(cfg.rope.l2)));
    sec("controller", &mut lines);
    let c = &cfg.controller;
    lines.push(("kp".into(), c.kp.to_string()));
    lines.push(("deadband".into(), c.deadband.to_string()));
    lines.push(("audio_threshold".into(), c.audio_threshold.to_string()));
    lines.push(("mod_max".into(), c.mod_max.to_string()));
    lines.push(("onset_guard".into(), c.onset_guard.to_string()));
    lines.push(("release_margin".into(), c.release_margin.to_string()));
    sec("noise", &mut lines);
    let n = &cfg.noise;
    lines.push(("rope_sigma".into(), n.rope_sigma.to_string()));
    lines.push(("lidar_sigma".into(), n.lidar_sigma.to_string()));
    lines.push(("gps_sigma".into(), n.gps_sigma.to_string()));
    lines.push(("imu_sigma_deg".into(), n.imu_sigma_deg.to_string()));
    lines.push(("imu_drift_deg_per_s".into(), n.imu_drift_deg_per_s.to_string()));
    lines.push(("veer_sigma_deg".into(), n.veer_sigma_deg.to_string()));
    sec("sensors", &mut lines);
    let s = &cfg.sensors;
    lines.push(("lidar_beams".into(), s.lidar_beams.to_string()));
    lines.push(("lidar_period".into(), s.lidar_period.to_string()));
    lines.push(("gps_period".into(), s.gps_period.to_string()));
    lines.push(("imu_window".into(), s.imu_window.to_string()));
    lines.push(("grid_resolution".into(), s.grid_resolution.to_string()));
    lines.push(("localize_beam_stride".into(), s.localize_beam_stride.to_string()));
    lines.push(("localize_min_confidence".into(), s.localize_min_confidence.to_string()));
    lines.push(("heading_fix_gain".into(), s.heading_fix_gain.to_string()));
    lines.push(("map_range".into(), s.map_range.to_string()));
    sec("nav", &mut lines);
    let nv = &cfg.nav;
    lines.push(("inflation".into(), nv.inflation.to_string()));
    lines.push(("preferred_margin".into(), nv.preferred_margin.to_string()));
    lines.push(("d_safe".into(), nv.d_safe.to_string()));
    lines.push(("corridor".into(), nv.corridor.to_string()));
    lines.push(("capture_radius".into(), nv.capture_radius.to_string()));
    lines.push(("lookahead".into(), nv.lookahead.to_string()));
    lines.push(("replan_interval".into(), nv.replan_interval.to_string()));
    lines.push(("gps_gain".into(), nv.gps_gain.to_string()));
    lines.push(("collision_threshold".into(), nv.collision_threshold.to_string()));
    lines.push(("halt_time".into(), nv.halt_time.to_string()));
    lines.push(("stop_distance".into(), nv.stop_distance.to_string()));
    lines.push(("stop_width".into(), nv.stop_width.to_string()));
    sec("baseline", &mut lines);
    let b = &cfg.baseline;
    lines.push(("audio_interval".into(), b.audio_interval.to_string()));
    lines.push(("audio_exec_sigma_deg".into(), b.audio_exec_sigma_deg.to_string()));
    lines.push(("human_gain".into(), b.human_gain.to_string()));
    lines.push(("human_deadband_deg".into(), b.human_deadband_deg.to_string()));
    lines.push(("cane_near_speed".into(), b.cane_near_speed.to_string()));
    lines.push(("cane_open_speed".into(), b.cane_open_speed.to_string()));
    lines.push(("cane_near_distance".into(), b.cane_near_distance.to_string()));
    sec("world", &mut lines);
    let w = &cfg.world;
    lines.push(("preset".into(), w.preset.name().into()));
    if let Some(bd) = w.bounds {
        lines.push(("bounds".into(), format!("{}, {}, {}, {}", bd.min.x, bd.min.y, bd.max.x, bd.max.y)));
    }
    lines.push(("obstacles_min".into(), w.obstacles_min.to_string()));
    lines.push(("obstacles_max".into(), w.obstacles_max.to_string()));
    for sg in &w.segments {
        lines.push(("segment".into(), format!("{}, {}, {}, {}", sg.a.x, sg.a.y, sg.b.x, sg.b.y)));
    }
    for r in &w.gps_regions {
        lines.push(("gps_region".into(), r.vertices.iter().map(|&p| pt(p)).collect::<Vec<_>>().join("; ")));
    }

    o.push_str(SCENARIO_MAGIC);
    o.push('\n');
    for (k, v) in lines {
        if k.starts_with('[') {
            o.push('\n');
            o.push_str(&k);
            o.push('\n');
        } else {
            o.push_str(&k);
            o.push_str(" = ");
            o.push_str(&v);
            o.push('\n');
        }
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gives_kind_defaults() {
        let cfg = parse_scenario("gaitguide-scenario v1\n[scenario]\nkind = Turn90\n").unwrap();
        assert_eq!(cfg, ScenarioConfig::default_for(ScenarioKind::Turn90));
    }

    #[test]
    fn keys_override_in_order() {
        let text = "\
gaitguide-scenario v1
# a steer test
[scenario]
kind = SteerToAngle
seed = 7
walker = AudioOnly
[task]
target_deg = -120
[world]
box = 2, -1, 3, 1
";
        let cfg = parse_scenario(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.walker, WalkerKind::AudioOnly);
        assert_eq!(cfg.target_angle, (-120f64).to_radians());
        assert_eq!(cfg.world.segments.len(), 4);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_scenario("gaitguide-scenario v1\n[scenario]\nkind = Turn90\n[noise]\nimu_sigma_deg = abc\n").unwrap_err();
        assert!(matches!(e, HarnessError::ScenarioParse { line: 5, .. }), "{e}");
        assert!(parse_scenario("[scenario]\nkind = Turn90\n").is_err());
        assert!(parse_scenario("gaitguide-scenario v1\n[scenario]\nseed = 1\n").is_err());
        assert!(parse_scenario("gaitguide-scenario v1\n[scenario]\nkind = Turn90\nbogus = 1\n").is_err());
    }

    #[test]
    fn text_round_trips_exactly() {
        for k in ScenarioKind::ALL {
            let mut cfg = ScenarioConfig::default_for(k);
            cfg.seed = 12345;
            cfg.start.heading = 0.1f64 + 0.2;
            cfg.world.segments.push(Segment::new(Vec2::new(0.1, 0.2), Vec2::new(1.0 / 3.0, 2.0)));
            let text = to_scenario_text(&cfg);
            assert_eq!(parse_scenario(&text).unwrap(), cfg, "{k:?}");
        }
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ScenarioConfig::default_for(ScenarioKind::Hallway);
        apply_override(&mut cfg, "noise.imu_sigma_deg=0").unwrap();
        apply_override(&mut cfg, "scenario.seed = 9").unwrap();
        assert_eq!(cfg.noise.imu_sigma_deg, 0.0);
        assert_eq!(cfg.seed, 9);
        assert!(apply_override(&mut cfg, "noise.nope=1").is_err());
        assert!(apply_override(&mut cfg, "scenario.kind=Turn90").is_err());
    }
}
