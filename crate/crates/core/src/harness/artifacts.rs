use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::geom::{Bounds, Vec2};
use crate::world_sense::WorldModel;

use super::format::to_scenario_text;
use super::sim::{PathRecord, RunOutcome};
use super::trace::Trace;
use super::HarnessError;

/// Files written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactPaths {
    pub trace: PathBuf,
    pub trajectory: PathBuf,
    pub rope: PathBuf,
    pub paths: PathBuf,
    pub scenario: PathBuf,
    pub metrics: PathBuf,
    /// Occupancy map and its sidecar, when a map was built.
    pub map: Option<(PathBuf, PathBuf)>,
}

/// Writes every artifact of `outcome` into `out_dir`. Contents are rendered
/// before anything touches the disk, and files already written are removed
/// again if a later write fails.
pub fn emit_artifacts(outcome: &RunOutcome, out_dir: &Path) -> Result<ArtifactPaths, HarnessError> {
    if outcome.trace.rows.is_empty() {
        return Err(HarnessError::IoFailure("trace has no rows".into()));
    }
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (out_dir.join("trace.csv"), outcome.trace.to_csv().into_bytes()),
        (out_dir.join("trajectory.svg"), trajectory_svg(&outcome.trace, &outcome.world, &outcome.paths).into_bytes()),
        (out_dir.join("rope.svg"), rope_svg(&outcome.trace).into_bytes()),
        (out_dir.join("paths.csv"), write_paths_csv(&outcome.paths).into_bytes()),
        (out_dir.join("scenario.scn"), to_scenario_text(&outcome.config).into_bytes()),
        (out_dir.join("metrics.txt"), outcome.metrics.to_text().into_bytes()),
    ];
    let map = outcome.grid.as_ref().map(|g| {
        let pgm = out_dir.join("map.pgm");
        let side = out_dir.join("map.txt");
        files.push((pgm.clone(), g.to_pgm()));
        files.push((side.clone(), g.sidecar().into_bytes()));
        (pgm, side)
    });

    fs::create_dir_all(out_dir).map_err(|e| HarnessError::IoFailure(format!("{}: {e}", out_dir.display())))?;
    for (i, (path, bytes)) in files.iter().enumerate() {
        if let Err(e) = fs::write(path, bytes) {
            for (p, _) in &files[..i] {
                let _ = fs::remove_file(p);
            }
            return Err(HarnessError::IoFailure(format!("{}: {e}", path.display())));
        }
    }
    Ok(ArtifactPaths {
        trace: files[0].0.clone(),
        trajectory: files[1].0.clone(),
        rope: files[2].0.clone(),
        paths: files[3].0.clone(),
        scenario: files[4].0.clone(),
        metrics: files[5].0.clone(),
        map,
    })
}

/// One row per waypoint: `plan,t,index,x,y`.
pub fn write_paths_csv(paths: &[PathRecord]) -> String {
    let mut s = String::from("plan,t,index,x,y\n");
    for (k, rec) in paths.iter().enumerate() {
        for (i, w) in rec.path.waypoints.iter().enumerate() {
            let _ = writeln!(s, "{k},{},{i},{},{}", rec.t, w.x, w.y);
        }
    }
    s
}

const SVG_W: f64 = 900.0;

struct Frame {
    b: Bounds,
    scale: f64,
    pad: f64,
}

impl Frame {
    fn new(b: Bounds) -> Self {
        let span = b.width().max(1e-9);
        Self { b, scale: (SVG_W - 40.0) / span, pad: 20.0 }
    }

    fn height(&self) -> f64 {
        self.b.height() * self.scale + 2.0 * self.pad
    }

    fn x(&self, v: f64) -> f64 {
        self.pad + (v - self.b.min.x) * self.scale
    }

    // SVG y grows downward.
    fn y(&self, v: f64) -> f64 {
        self.pad + (self.b.max.y - v) * self.scale
    }
}

fn polyline(f: &Frame, pts: impl Iterator<Item = Vec2>, style: &str) -> String {
    let mut d = String::new();
    for p in pts {
        let _ = write!(d, "{:.2},{:.2} ", f.x(p.x), f.y(p.y));
    }
    format!("<polyline points=\"{}\" fill=\"none\" {style}/>\n", d.trim_end())
}

/// Plan view: walls, GPS regions, planned routes, true and estimated paths,
/// step events and audio cues.
pub fn trajectory_svg(trace: &Trace, world: &WorldModel, paths: &[PathRecord]) -> String {
    let mut b = world.bounds;
    for r in &trace.rows {
        for (x, y) in [(r.true_x, r.true_y), (r.est_x, r.est_y)] {
            if x.is_finite() && y.is_finite() {
                b.min.x = b.min.x.min(x);
                b.min.y = b.min.y.min(y);
                b.max.x = b.max.x.max(x);
                b.max.y = b.max.y.max(y);
            }
        }
    }
    let f = Frame::new(b);
    let mut s = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SVG_W:.0}\" height=\"{:.0}\">\n",
        f.height()
    );
    let _ = writeln!(s, "<title>{} seed {}</title>", trace.meta.scenario, trace.meta.seed);
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for poly in &world.gps_regions {
        let mut d = String::new();
        for v in &poly.vertices {
            let _ = write!(d, "{:.2},{:.2} ", f.x(v.x), f.y(v.y));
        }
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"#e6f2e6\" stroke=\"none\"/>", d.trim_end());
    }
    s.push_str("<g id=\"walls\" stroke=\"black\" stroke-width=\"2\">\n");
    for seg in &world.segments {
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/>",
            f.x(seg.a.x),
            f.y(seg.a.y),
            f.x(seg.b.x),
            f.y(seg.b.y)
        );
    }
    s.push_str("</g>\n<g id=\"plans\">\n");
    for rec in paths {
        s.push_str(&polyline(&f, rec.path.waypoints.iter().copied(), "stroke=\"#999999\" stroke-dasharray=\"4 3\""));
    }
    s.push_str("</g>\n");
    if let Some(g) = trace.meta.goal {
        let _ = writeln!(s, "<circle id=\"goal\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"6\" fill=\"none\" stroke=\"green\" stroke-width=\"2\"/>", f.x(g.x), f.y(g.y));
    }
    s.push_str(&polyline(&f, trace.rows.iter().map(|r| Vec2::new(r.est_x, r.est_y)), "id=\"estimated\" stroke=\"#d08000\" stroke-width=\"1.5\""));
    s.push_str(&polyline(&f, trace.rows.iter().map(|r| Vec2::new(r.true_x, r.true_y)), "id=\"true\" stroke=\"#1f4fbf\" stroke-width=\"2\""));
    s.push_str("<g id=\"steps\" fill=\"#1f4fbf\">\n");
    for w in trace.rows.windows(2) {
        if w[1].step_count > w[0].step_count {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\"/>", f.x(w[1].true_x), f.y(w[1].true_y));
        }
    }
    s.push_str("</g>\n<g id=\"audio\" fill=\"red\">\n");
    let mut prev = "None";
    for r in &trace.rows {
        if r.audio != "None" && r.audio != prev {
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\"><title>{} t={:.2}</title></rect>",
                f.x(r.true_x) - 3.0,
                f.y(r.true_y) - 3.0,
                r.audio,
                r.t
            );
        }
        prev = &r.audio;
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Span of the trace during which either leg carried a stride modulation.
pub fn turn_window(trace: &Trace) -> Option<(f64, f64)> {
    let active = |r: &&super::trace::TraceRow| r.mod_left != 0.0 || r.mod_right != 0.0;
    let t1 = trace.rows.iter().find(active)?.t;
    let t2 = trace.rows.iter().rev().find(active)?.t;
    Some((t1, t2))
}

/// Relative difference of the left and right rope-length amplitudes
/// (max − min) over rows with `t0 <= t <= t1`; `None` with fewer than two rows.
pub fn rope_asymmetry(trace: &Trace, t0: f64, t1: f64) -> Option<f64> {
    let rows: Vec<_> = trace.rows.iter().filter(|r| r.t >= t0 - 1e-9 && r.t <= t1 + 1e-9).collect();
    if rows.len() < 2 {
        return None;
    }
    let amp = |get: fn(&super::trace::TraceRow) -> f64| {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(get(r)), hi.max(get(r))));
        hi - lo
    };
    let (l, r) = (amp(|r| r.l_left), amp(|r| r.l_right));
    let m = l.max(r);
    Some(if m > 0.0 { (r - l).abs() / m } else { 0.0 })
}

/// Rope length against time for both legs, with the modulation window shaded.
pub fn rope_svg(trace: &Trace) -> String {
    let (w, h, pad) = (SVG_W, 360.0, 40.0);
    let rows = &trace.rows;
    let t_end = rows.last().map_or(1.0, |r| r.t).max(1e-9);
    let (lo, hi) = rows
        .iter()
        .flat_map(|r| [r.l_left, r.l_right])
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.01, lo + 0.01) };
    let px = |t: f64| pad + t / t_end * (w - 2.0 * pad);
    let py = |v: f64| h - pad - (v - lo) / (hi - lo) * (h - 2.0 * pad);

    let mut s = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\">\n"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if let Some((t1, t2)) = turn_window(trace) {
        let _ = writeln!(
            s,
            "<rect id=\"turn-window\" x=\"{:.2}\" y=\"{pad}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#fff0d0\"><title>t1={t1:.2} t2={t2:.2}</title></rect>",
            px(t1),
            (px(t2) - px(t1)).max(1.0),
            h - 2.0 * pad
        );
    }
    let _ = writeln!(
        s,
        "<g stroke=\"#444\"><line x1=\"{pad}\" y1=\"{:.0}\" x2=\"{:.0}\" y2=\"{:.0}\"/><line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{:.0}\"/></g>",
        h - pad,
        w - pad,
        h - pad,
        h - pad
    );
    let _ = writeln!(s, "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"12\">t (s), 0 to {t_end:.2}</text>", w / 2.0, h - 10.0);
    let _ = writeln!(s, "<text x=\"4\" y=\"{:.0}\" font-size=\"12\">L (m) {lo:.3} to {hi:.3}</text>", pad - 10.0);
    for (id, color, get) in [
        ("left", "#1f4fbf", (|r: &super::trace::TraceRow| r.l_left) as fn(&super::trace::TraceRow) -> f64),
        ("right", "#c0392b", |r: &super::trace::TraceRow| r.l_right),
    ] {
        let mut d = String::new();
        for r in rows {
            let _ = write!(d, "{:.2},{:.2} ", px(r.t), py(get(r)));
        }
        let _ = writeln!(s, "<polyline id=\"{id}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>", d.trim_end());
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_scenario, ScenarioConfig, ScenarioKind};

    #[test]
    fn empty_trace_writes_nothing() {
        let mut out = run_scenario(&ScenarioConfig::default_for(ScenarioKind::Turn90)).unwrap();
        out.trace.rows.clear();
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        assert!(matches!(emit_artifacts(&out, &target), Err(HarnessError::IoFailure(_))));
        assert!(!target.exists());
    }

    #[test]
    fn writes_all_files() {
        let out = run_scenario(&ScenarioConfig::default_for(ScenarioKind::Turn90)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = emit_artifacts(&out, dir.path()).unwrap();
        for f in [&p.trace, &p.trajectory, &p.rope, &p.paths, &p.scenario, &p.metrics] {
            assert!(f.exists(), "{}", f.display());
        }
        let svg = fs::read_to_string(&p.rope).unwrap();
        assert!(svg.starts_with("<?xml") && svg.contains("version=\"1.1\""));
    }
}
