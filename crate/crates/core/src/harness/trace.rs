use std::fmt::Write as _;
use std::io::BufRead;

use crate::geom::Vec2;

use super::scenario::{ScenarioKind, WalkerKind};
use super::HarnessError;

pub const TRACE_MAGIC: &str = "# gaitguide-trace v1";

pub const TRACE_COLUMNS: [&str; 19] = [
    "t",
    "true_x",
    "true_y",
    "true_heading",
    "est_x",
    "est_y",
    "est_heading",
    "mode",
    "L_left",
    "L_right",
    "phase_left",
    "phase_right",
    "tension_left",
    "tension_right",
    "mod_left",
    "mod_right",
    "audio",
    "min_scan_range",
    "step_count",
];

/// Run-level facts needed to score a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub walker: WalkerKind,
    pub seed: u64,
    pub dt: f64,
    pub duration_cap: f64,
    /// Absolute target heading of heading tasks, radians.
    pub target_heading: f64,
    pub tolerance: f64,
    pub goal: Option<Vec2>,
    pub arrive_tolerance: f64,
    pub collision_threshold: f64,
}

/// One tick. Angles in radians, lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_heading: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_heading: f64,
    pub mode: String,
    pub l_left: f64,
    pub l_right: f64,
    pub phase_left: String,
    pub phase_right: String,
    pub tension_left: String,
    pub tension_right: String,
    pub mod_left: f64,
    pub mod_right: f64,
    pub audio: String,
    /// Distance from the true position to the nearest obstacle.
    pub min_scan_range: f64,
    pub step_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

fn opt_goal(g: Option<Vec2>) -> (String, String) {
    match g {
        Some(p) => (p.x.to_string(), p.y.to_string()),
        None => ("none".into(), "none".into()),
    }
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let (gx, gy) = opt_goal(m.goal);
        let mut s = String::with_capacity(self.rows.len() * 160 + 512);
        let _ = writeln!(
            s,
            "{TRACE_MAGIC} scenario={} kind={} walker={} seed={} dt={} duration_cap={} target_heading={} tolerance={} goal_x={gx} goal_y={gy} arrive_tolerance={} collision_threshold={}",
            m.scenario.replace(' ', "_"),
            m.kind.name(),
            m.walker.name(),
            m.seed,
            m.dt,
            m.duration_cap,
            m.target_heading,
            m.tolerance,
            m.arrive_tolerance,
            m.collision_threshold,
        );
        s.push_str(&TRACE_COLUMNS.join(","));
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.true_x,
                r.true_y,
                r.true_heading,
                r.est_x,
                r.est_y,
                r.est_heading,
                r.mode,
                r.l_left,
                r.l_right,
                r.phase_left,
                r.phase_right,
                r.tension_left,
                r.tension_right,
                r.mod_left,
                r.mod_right,
                r.audio,
                r.min_scan_range,
                r.step_count
            );
        }
        s
    }

    pub fn from_csv<R: BufRead>(reader: R) -> Result<Trace, HarnessError> {
        let mut lines = reader.lines().enumerate();
        let perr = |line: usize, reason: String| HarnessError::TraceParse { line, reason };
        let (_, first) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let first = first.map_err(|e| HarnessError::IoFailure(e.to_string()))?;
        let rest = first
            .strip_prefix(TRACE_MAGIC)
            .ok_or_else(|| perr(1, "missing trace header comment".into()))?;
        let meta = parse_meta(rest).map_err(|r| perr(1, r))?;
        let (_, header) = lines.next().ok_or_else(|| perr(2, "missing column header".into()))?;
        let header = header.map_err(|e| HarnessError::IoFailure(e.to_string()))?;
        if header.trim() != TRACE_COLUMNS.join(",") {
            return Err(perr(2, "column header does not match the trace schema".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| HarnessError::IoFailure(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(parse_row(&line).map_err(|r| perr(i + 1, r))?);
        }
        Ok(Trace { meta, rows })
    }
}

fn parse_meta(s: &str) -> Result<TraceMeta, String> {
    let mut kv = std::collections::HashMap::new();
    for tok in s.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad meta token '{tok}'"))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| format!("meta key '{k}' missing"));
    let num = |k: &str| -> Result<f64, String> { get(k)?.parse().map_err(|_| format!("meta key '{k}' is not a number")) };
    let goal = match (get("goal_x")?, get("goal_y")?) {
        ("none", _) | (_, "none") => None,
        _ => Some(Vec2::new(num("goal_x")?, num("goal_y")?)),
    };
    Ok(TraceMeta {
        scenario: get("scenario")?.to_string(),
        kind: ScenarioKind::from_name(get("kind")?).ok_or("unknown kind")?,
        walker: WalkerKind::from_name(get("walker")?).ok_or("unknown walker")?,
        seed: get("seed")?.parse().map_err(|_| "bad seed")?,
        dt: num("dt")?,
        duration_cap: num("duration_cap")?,
        target_heading: num("target_heading")?,
        tolerance: num("tolerance")?,
        goal,
        arrive_tolerance: num("arrive_tolerance")?,
        collision_threshold: num("collision_threshold")?,
    })
}

fn parse_row(line: &str) -> Result<TraceRow, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != TRACE_COLUMNS.len() {
        return Err(format!("expected {} columns, found {}", TRACE_COLUMNS.len(), f.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        f[i].parse().map_err(|_| format!("column {} is not a number: '{}'", TRACE_COLUMNS[i], f[i]))
    };
    Ok(TraceRow {
        t: num(0)?,
        true_x: num(1)?,
        true_y: num(2)?,
        true_heading: num(3)?,
        est_x: num(4)?,
        est_y: num(5)?,
        est_heading: num(6)?,
        mode: f[7].to_string(),
        l_left: num(8)?,
        l_right: num(9)?,
        phase_left: f[10].to_string(),
        phase_right: f[11].to_string(),
        tension_left: f[12].to_string(),
        tension_right: f[13].to_string(),
        mod_left: num(14)?,
        mod_right: num(15)?,
        audio: f[16].to_string(),
        min_scan_range: num(17)?,
        step_count: f[18].parse().map_err(|_| "bad step_count".to_string())?,
    })
}
