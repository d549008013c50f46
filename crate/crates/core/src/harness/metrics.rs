use crate::geom::{wrap_angle, Vec2};

use super::trace::Trace;

/// Outcome measures of one run, all derived from its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Seconds until the task was met, or the run length if it never was.
    pub completion_time: f64,
    pub path_length: f64,
    /// RMS distance from the line through the start pose, meters.
    pub lateral_rmse: f64,
    /// Absolute error to the target heading at the end of the run, degrees.
    pub final_heading_error: f64,
    /// Number of separate contact episodes.
    pub collision_count: u64,
    pub steps: u64,
    pub arrived: bool,
}

impl RunMetrics {
    /// `key=value` lines, one per field.
    pub fn to_text(&self) -> String {
        format!(
            "completion_time={}\npath_length={}\nlateral_rmse={}\nfinal_heading_error={}\ncollision_count={}\nsteps={}\narrived={}\n",
            self.completion_time,
            self.path_length,
            self.lateral_rmse,
            self.final_heading_error,
            self.collision_count,
            self.steps,
            self.arrived
        )
    }
}

/// Scores a trace. Heading tasks complete when the true heading first comes
/// within tolerance of the target; navigation tasks complete when the run
/// ends before the duration cap, and count as arrived when the true
/// position is then within the arrival radius.
pub fn metrics_from_trace(trace: &Trace) -> RunMetrics {
    let m = &trace.meta;
    let rows = &trace.rows;
    let Some(first) = rows.first() else {
        return RunMetrics {
            completion_time: 0.0,
            path_length: 0.0,
            lateral_rmse: 0.0,
            final_heading_error: 0.0,
            collision_count: 0,
            steps: 0,
            arrived: false,
        };
    };
    let last = rows.last().unwrap_or(first);

    let mut path_length = 0.0;
    for w in rows.windows(2) {
        path_length += Vec2::new(w[1].true_x - w[0].true_x, w[1].true_y - w[0].true_y).norm();
    }

    let origin = Vec2::new(first.true_x, first.true_y);
    let dir = Vec2::from_angle(first.true_heading);
    let sq: f64 = rows
        .iter()
        .map(|r| dir.cross(Vec2::new(r.true_x, r.true_y) - origin).powi(2))
        .sum();
    let lateral_rmse = (sq / rows.len() as f64).sqrt();

    let mut collision_count = 0;
    let mut touching = false;
    for r in rows {
        let now = r.min_scan_range < m.collision_threshold;
        if now && !touching {
            collision_count += 1;
        }
        touching = now;
    }

    let err_at = |h: f64| wrap_angle(m.target_heading - h);
    let final_err = err_at(last.true_heading);
    let (completion_time, arrived) = if m.kind.is_heading_task() {
        match rows.iter().find(|r| err_at(r.true_heading).abs() <= m.tolerance) {
            Some(r) => (r.t, final_err.abs() <= m.tolerance),
            None => (last.t, false),
        }
    } else {
        let finished = last.t < m.duration_cap - 0.5 * m.dt;
        let close = m.goal.map_or(false, |g| Vec2::new(last.true_x, last.true_y).dist(g) <= m.arrive_tolerance);
        (last.t, finished && close)
    };

    RunMetrics {
        completion_time,
        path_length,
        lateral_rmse,
        final_heading_error: final_err.abs().to_degrees(),
        collision_count,
        steps: last.step_count,
        arrived,
    }
}
