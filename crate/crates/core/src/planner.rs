//! Route planning on occupancy grids, reactive heading selection from LIDAR,
//! and waypoint following.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

use crate::geom::{wrap_angle, Pose, Vec2};
use crate::world_sense::{OccupancyGrid, ScanFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path between start and goal")]
    NoPath,
    #[error("start lies in blocked or unmapped space")]
    StartBlocked,
    #[error("goal lies in blocked or unmapped space")]
    GoalBlocked,
    #[error("every heading is blocked")]
    Blocked,
    #[error("scan is unusable")]
    DegenerateScan,
    #[error("path exhausted")]
    PathExhausted,
    #[error("path has no waypoints")]
    EmptyPath,
}

pub const DEFAULT_INFLATION: f64 = 0.35;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub waypoints: Vec<Vec2>,
    pub total_cost: f64,
}

impl PlannedPath {
    /// Path through the given points, costed by segment length.
    pub fn from_waypoints(waypoints: Vec<Vec2>) -> Self {
        let total_cost = waypoints.windows(2).map(|w| w[0].dist(w[1])).sum();
        Self { waypoints, total_cost }
    }

    pub fn goal(&self) -> Option<Vec2> {
        self.waypoints.last().copied()
    }
}

/// Cells blocked after growing every occupied cell by a radius.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedMask {
    pub width: usize,
    pub height: usize,
    pub blocked: Vec<bool>,
}

impl BlockedMask {
    pub fn inflate(grid: &OccupancyGrid, radius: f64) -> Self {
        let (w, h) = (grid.width, grid.height);
        let reach = (radius / grid.resolution).floor() as i64;
        let r2 = (radius / grid.resolution).powi(2) + 1e-9;
        let offsets: Vec<(i64, i64)> = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| (dx * dx + dy * dy) as f64 <= r2)
            .collect();
        let mut blocked = vec![false; w * h];
        for row in 0..h {
            for col in 0..w {
                if !grid.is_occupied(col, row) {
                    continue;
                }
                for &(dx, dy) in &offsets {
                    let (c, r) = (col as i64 + dx, row as i64 + dy);
                    if c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h {
                        blocked[r as usize * w + c as usize] = true;
                    }
                }
            }
        }
        Self { width: w, height: h, blocked }
    }

    pub fn is_blocked(&self, col: usize, row: usize) -> bool {
        self.blocked[row * self.width + col]
    }

    fn free(&self, c: i64, r: i64) -> bool {
        c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height && !self.is_blocked(c as usize, r as usize)
    }

    /// Neighbors of a free cell as `(col, row, diagonal)`. Diagonal moves
    /// may not cut past a blocked corner.
    pub fn neighbors(&self, col: usize, row: usize) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        const MOVES: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let (c, r) = (col as i64, row as i64);
        MOVES.iter().filter_map(move |&(dx, dy)| {
            let (nc, nr) = (c + dx, r + dy);
            if !self.free(nc, nr) {
                return None;
            }
            let diag = dx != 0 && dy != 0;
            if diag && !(self.free(c + dx, r) && self.free(c, r + dy)) {
                return None;
            }
            Some((nc as usize, nr as usize, diag))
        })
    }
}

/// Path length as counts of straight and diagonal moves, so equal-length
/// paths compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MoveCount {
    pub straight: u32,
    pub diagonal: u32,
}

impl MoveCount {
    pub fn cells(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }

    pub fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Self { diagonal: self.diagonal + 1, ..self }
        } else {
            Self { straight: self.straight + 1, ..self }
        }
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // BinaryHeap pops the maximum, so the preferred entry compares greatest:
    // lowest f, then highest g, then lowest row-major index.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A* over a blocked mask between cells. Returns the cell sequence and its
/// move count.
pub fn astar_cells(
    mask: &BlockedMask,
    start: (usize, usize),
    goal: (usize, usize),
) -> Result<(Vec<(usize, usize)>, MoveCount), PlanError> {
    if !mask.free(start.0 as i64, start.1 as i64) {
        return Err(PlanError::StartBlocked);
    }
    if !mask.free(goal.0 as i64, goal.1 as i64) {
        return Err(PlanError::GoalBlocked);
    }
    let w = mask.width;
    let n = w * mask.height;
    let idx = |c: usize, r: usize| r * w + c;
    let h = |c: usize, r: usize| ((c as f64 - goal.0 as f64).powi(2) + (r as f64 - goal.1 as f64).powi(2)).sqrt();
    let mut g: Vec<Option<MoveCount>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = idx(start.0, start.1);
    g[s] = Some(MoveCount::default());
    open.push(Open { f: h(start.0, start.1), g: 0.0, idx: s });
    let target = idx(goal.0, goal.1);
    while let Some(Open { idx: cur, .. }) = open.pop() {
        if closed[cur] {
            continue;
        }
        if cur == target {
            let mut cells = vec![goal];
            let mut k = cur;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push((k % w, k / w));
            }
            cells.reverse();
            return Ok((cells, g[cur].unwrap_or_default()));
        }
        closed[cur] = true;
        let gc = g[cur].unwrap_or_default();
        for (nc, nr, diag) in mask.neighbors(cur % w, cur / w) {
            let ni = idx(nc, nr);
            if closed[ni] {
                continue;
            }
            let cand = gc.step(diag);
            if g[ni].map_or(true, |old| cand.cells() < old.cells()) {
                g[ni] = Some(cand);
                parent[ni] = cur;
                let gv = cand.cells();
                open.push(Open { f: gv + h(nc, nr), g: gv, idx: ni });
            }
        }
    }
    Err(PlanError::NoPath)
}

/// Shortest 8-connected route through free space of the inflated grid.
/// Waypoints are cell centers from the start cell to the goal cell.
pub fn plan_path(grid: &OccupancyGrid, start: Vec2, goal: Vec2, inflation_radius: f64) -> Result<PlannedPath, PlanError> {
    let mask = BlockedMask::inflate(grid, inflation_radius);
    plan_on_mask(grid, &mask, start, goal)
}

pub fn plan_on_mask(grid: &OccupancyGrid, mask: &BlockedMask, start: Vec2, goal: Vec2) -> Result<PlannedPath, PlanError> {
    let s = grid.cell_of(start).ok_or(PlanError::StartBlocked)?;
    let g = grid.cell_of(goal).ok_or(PlanError::GoalBlocked)?;
    let (cells, moves) = astar_cells(mask, s, g)?;
    Ok(PlannedPath {
        waypoints: cells.into_iter().map(|(c, r)| grid.center(c, r)).collect(),
        total_cost: moves.cells() * grid.resolution,
    })
}

/// Center of the unblocked cell closest to `p` within `max_radius`, ties
/// going to the lower row-major index.
pub fn nearest_free(grid: &OccupancyGrid, mask: &BlockedMask, p: Vec2, max_radius: f64) -> Option<Vec2> {
    let (c0, r0) = grid.cell_unbounded(p);
    let reach = (max_radius / grid.resolution).ceil() as i64;
    let mut best: Option<(f64, usize, Vec2)> = None;
    for r in r0 - reach..=r0 + reach {
        for c in c0 - reach..=c0 + reach {
            if !grid.in_grid(c, r) || mask.is_blocked(c as usize, r as usize) {
                continue;
            }
            let q = grid.center(c as usize, r as usize);
            let d = q.dist(p);
            let k = r as usize * mask.width + c as usize;
            if d <= max_radius && best.map_or(true, |(bd, bk, _)| d < bd || (d == bd && k < bk)) {
                best = Some((d, k, q));
            }
        }
    }
    best.map(|b| b.2)
}

/// True when any point of `path`, waypoints or the straight legs between
/// them, falls in a blocked cell.
pub fn path_blocked(grid: &OccupancyGrid, mask: &BlockedMask, path: &PlannedPath) -> bool {
    match path.waypoints.as_slice() {
        [] => false,
        [p] => !segment_clear(grid, mask, *p, *p),
        w => w.windows(2).any(|s| !segment_clear(grid, mask, s[0], s[1])),
    }
}

/// Whether the straight segment `a`–`b` stays inside the grid and off
/// blocked cells, sampled every quarter cell.
pub fn segment_clear(grid: &OccupancyGrid, mask: &BlockedMask, a: Vec2, b: Vec2) -> bool {
    let n = ((a.dist(b) / (0.25 * grid.resolution)).ceil() as usize).max(1);
    (0..=n).all(|i| {
        let p = a + (b - a) * (i as f64 / n as f64);
        grid.cell_of(p).map_or(false, |(c, r)| !mask.is_blocked(c, r))
    })
}

/// Drops every waypoint that can be skipped in a straight line, keeping the
/// first and last. Each kept waypoint is the farthest one visible from the
/// previous kept waypoint.
pub fn shortcut_path(grid: &OccupancyGrid, mask: &BlockedMask, path: &PlannedPath) -> PlannedPath {
    let w = &path.waypoints;
    if w.len() <= 2 {
        return path.clone();
    }
    let mut kept = vec![w[0]];
    let mut i = 0;
    while i < w.len() - 1 {
        let mut j = w.len() - 1;
        while j > i + 1 && !segment_clear(grid, mask, w[i], w[j]) {
            j -= 1;
        }
        kept.push(w[j]);
        i = j;
    }
    PlannedPath::from_waypoints(kept)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidConfig {
    pub d_safe: f64,
    pub corridor: f64,
}

impl Default for AvoidConfig {
    fn default() -> Self {
        Self { d_safe: 1.0, corridor: 0.6 }
    }
}

/// Picks the admissible heading closest to `desired`, both in the sensor
/// frame. A beam shorter than `d_safe` at angle `a` and range `r` blocks the
/// open window `a ± atan(corridor / 2r)`. Equal distances on both sides
/// resolve toward the side of `desired` (left when it is zero).
pub fn avoid_obstacles(scan: &ScanFrame, desired: f64, d_safe: f64, corridor: f64) -> Result<f64, PlanError> {
    if scan.n_beams == 0 || scan.ranges.len() != scan.n_beams || scan.ranges.iter().any(|r| r.is_nan()) {
        return Err(PlanError::DegenerateScan);
    }
    let desired = wrap_angle(desired);
    let windows: Vec<(f64, f64)> = scan
        .ranges
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < d_safe)
        .map(|(i, &r)| (scan.beam_angle(i), (0.5 * corridor / r.max(1e-6)).atan()))
        .collect();
    // Window edges are admissible; the slack absorbs rounding in `a ± w`.
    let admissible = |phi: f64| windows.iter().all(|&(a, w)| wrap_angle(phi - a).abs() >= w - 1e-12);
    if admissible(desired) {
        return Ok(desired);
    }
    let side = if desired >= 0.0 { 1.0 } else { -1.0 };
    let mut best: Option<(f64, f64)> = None;
    for &(a, w) in &windows {
        for phi in [a - w, a + w] {
            if w >= PI || !admissible(phi) {
                continue;
            }
            let d = wrap_angle(phi - desired);
            let better = match best {
                None => true,
                Some((_, bd)) => {
                    let (da, db) = (d.abs(), bd.abs());
                    da < db - 1e-12 || ((da - db).abs() <= 1e-12 && d * side > bd * side)
                }
            };
            if better {
                best = Some((wrap_angle(phi), d));
            }
        }
    }
    best.map(|(phi, _)| phi).ok_or(PlanError::Blocked)
}

/// Pure-pursuit target selection along a path. The waypoint index only moves
/// forward.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointFollower {
    pub path: PlannedPath,
    pub capture_radius: f64,
    index: usize,
}

impl WaypointFollower {
    pub fn new(path: PlannedPath, capture_radius: f64) -> Result<Self, PlanError> {
        if path.waypoints.is_empty() {
            return Err(PlanError::EmptyPath);
        }
        Ok(Self { path, capture_radius, index: 0 })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn target(&self) -> Vec2 {
        self.path.waypoints[self.index]
    }

    pub fn target_heading(&mut self, pose: &Pose) -> Result<f64, PlanError> {
        follow_waypoints(&self.path, pose, self.capture_radius, &mut self.index)
    }
}

/// Heading toward the first waypoint at or after `*index` that lies farther
/// than `capture_radius`. Fails with [`PlanError::PathExhausted`] once the
/// final waypoint is within the radius.
pub fn follow_waypoints(path: &PlannedPath, pose: &Pose, capture_radius: f64, index: &mut usize) -> Result<f64, PlanError> {
    let goal = path.goal().ok_or(PlanError::EmptyPath)?;
    let p = pose.position();
    if p.dist(goal) <= capture_radius {
        *index = path.waypoints.len() - 1;
        return Err(PlanError::PathExhausted);
    }
    let last = path.waypoints.len() - 1;
    while *index < last && p.dist(path.waypoints[*index]) <= capture_radius {
        *index += 1;
    }
    Ok((path.waypoints[*index] - p).angle())
}

/// Point `lookahead` meters along `path` past the closest point to `p`.
/// The search starts at leg `from_leg` and looks a few legs ahead, so
/// progress along the path never moves backward; returns the leg holding
/// the closest point along with the lookahead point.
pub fn lookahead_point(path: &PlannedPath, from_leg: usize, p: Vec2, lookahead: f64) -> Option<(usize, Vec2)> {
    let w = &path.waypoints;
    match w.len() {
        0 => return None,
        1 => return Some((0, w[0])),
        _ => {}
    }
    let legs = w.len() - 1;
    let first = from_leg.min(legs - 1);
    let mut best = (f64::INFINITY, first, 0.0);
    for k in first..(first + 4).min(legs) {
        let (a, b) = (w[k], w[k + 1]);
        let e = b - a;
        let len2 = e.dot(e);
        let u = if len2 > 0.0 { ((p - a).dot(e) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = p.dist(a + e * u);
        if d < best.0 {
            best = (d, k, u);
        }
    }
    let (_, leg, u) = best;
    let mut left = lookahead;
    let mut at = w[leg] + (w[leg + 1] - w[leg]) * u;
    for k in leg..legs {
        let to = w[k + 1];
        let d = at.dist(to);
        if d >= left {
            return Some((leg, at + (to - at) * (left / d)));
        }
        left -= d;
        at = to;
    }
    Some((leg, w[legs]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn nearest_free_steps_out_of_inflation() {
        let mut g = open_grid();
        g.set(50, 10, 5.0);
        let mask = BlockedMask::inflate(&g, 0.25);
        let p = g.center(50, 11);
        assert!(mask.is_blocked(50, 11));
        let q = nearest_free(&g, &mask, p, 1.0).unwrap();
        let (c, r) = g.cell_of(q).unwrap();
        assert!(!mask.is_blocked(c, r));
        assert!(q.dist(p) <= 0.3 + 1e-9);
        assert_eq!(nearest_free(&g, &mask, p, 0.05), None);
    }

    #[test]
    fn lookahead_rounds_the_corner() {
        let path = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(2.0, 2.0)]);
        let (leg, q) = lookahead_point(&path, 0, Vec2::new(0.5, 0.1), 1.0).unwrap();
        assert_eq!(leg, 0);
        assert!((q.x - 1.5).abs() < 1e-12 && q.y.abs() < 1e-12);
        let (leg, q) = lookahead_point(&path, 0, Vec2::new(1.8, 0.0), 1.0).unwrap();
        assert_eq!(leg, 0);
        assert!((q.x - 2.0).abs() < 1e-12 && (q.y - 0.8).abs() < 1e-12);
        let (_, q) = lookahead_point(&path, 1, Vec2::new(2.0, 1.5), 1.0).unwrap();
        assert_eq!(q, Vec2::new(2.0, 2.0));
    }

    fn open_grid() -> OccupancyGrid {
        OccupancyGrid::new(Vec2::new(-0.05, -1.05), 0.1, 120, 21)
    }

    fn scan(ranges: Vec<f64>) -> ScanFrame {
        let n = ranges.len();
        let (angle_min, angle_max) = ScanFrame::full_circle(n);
        ScanFrame { stamp: 0.0, angle_min, angle_max, n_beams: n, ranges }
    }

    #[test]
    fn shortcut_keeps_clearance_and_ends() {
        let mut g = open_grid();
        for r in 0..15 {
            g.set(50, r, 5.0);
        }
        let mask = BlockedMask::inflate(&g, 0.2);
        let raw = plan_on_mask(&g, &mask, Vec2::new(0.0, -0.5), Vec2::new(10.0, -0.5)).unwrap();
        let short = shortcut_path(&g, &mask, &raw);
        assert!(short.waypoints.len() < raw.waypoints.len());
        assert!(short.waypoints.len() >= 3);
        assert_eq!(short.waypoints.first(), raw.waypoints.first());
        assert_eq!(short.goal(), raw.goal());
        assert!(!path_blocked(&g, &mask, &short));
        assert!(short.total_cost <= raw.total_cost + 1e-9);
    }

    #[test]
    fn straight_line_on_empty_grid() {
        let p = plan_path(&open_grid(), Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), DEFAULT_INFLATION).unwrap();
        assert!((p.total_cost - 10.0).abs() < 1e-9);
        assert_eq!(p.waypoints.len(), 101);
        assert!(p.waypoints.iter().all(|w| w.y.abs() < 1e-9));
    }

    #[test]
    fn walled_off_goal_has_no_path() {
        let mut g = open_grid();
        for r in 0..g.height {
            g.set(80, r, 5.0);
        }
        assert_eq!(plan_path(&g, Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), 0.0), Err(PlanError::NoPath));
    }

    #[test]
    fn blocked_endpoints_reported() {
        let mut g = open_grid();
        g.set(0, 10, 5.0);
        g.set(100, 10, 5.0);
        assert_eq!(plan_path(&g, Vec2::new(0.0, 0.0), Vec2::new(5.0, 0.0), 0.2), Err(PlanError::StartBlocked));
        assert_eq!(plan_path(&g, Vec2::new(5.0, 0.0), Vec2::new(10.0, 0.0), 0.2), Err(PlanError::GoalBlocked));
    }

    #[test]
    fn cost_matches_segment_lengths_and_steps_are_adjacent() {
        let mut g = open_grid();
        for r in 3..21 {
            g.set(40, r, 5.0);
        }
        let p = plan_path(&g, Vec2::new(0.0, 0.5), Vec2::new(10.0, 0.5), 0.2).unwrap();
        let sum: f64 = p.waypoints.windows(2).map(|w| w[0].dist(w[1])).sum();
        assert!((sum - p.total_cost).abs() < 1e-9);
        for w in p.waypoints.windows(2) {
            let d = w[1] - w[0];
            assert!(d.x.abs() < 0.1 + 1e-9 && d.y.abs() < 0.1 + 1e-9 && d.norm() > 0.0);
        }
    }

    #[test]
    fn open_scan_keeps_desired() {
        let s = scan(vec![f64::INFINITY; 360]);
        assert_eq!(avoid_obstacles(&s, 0.3, 1.0, 0.6).unwrap(), 0.3);
    }

    #[test]
    fn wall_ahead_picks_gap_on_desired_side() {
        // Odd beam count: beam 90 points straight ahead, beams 85..=95 see a
        // narrow panel at 0.5 m.
        let mut r = vec![f64::INFINITY; 181];
        for v in r.iter_mut().take(96).skip(85) {
            *v = 0.5;
        }
        let s = scan(r);
        let left = avoid_obstacles(&s, 0.01, 1.0, 0.6).unwrap();
        let right = avoid_obstacles(&s, -0.01, 1.0, 0.6).unwrap();
        assert!(left > 0.0 && right < 0.0, "{left} {right}");
        let zero_l = avoid_obstacles(&s, 0.0, 1.0, 0.6).unwrap();
        assert_eq!(zero_l, left);
        let edge = s.beam_angle(95) + (0.3f64 / 0.5).atan();
        assert!((left - edge).abs() < 1e-12);
        assert!((left + right).abs() < 1e-12);
    }

    #[test]
    fn enclosed_is_blocked() {
        let s = scan(vec![0.4; 360]);
        assert_eq!(avoid_obstacles(&s, 0.0, 1.0, 0.6), Err(PlanError::Blocked));
    }

    #[test]
    fn empty_scan_is_degenerate() {
        assert_eq!(avoid_obstacles(&scan(vec![]), 0.0, 1.0, 0.6), Err(PlanError::DegenerateScan));
    }

    #[test]
    fn follower_at_first_waypoint_heads_to_second() {
        let path = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 3.0), Vec2::new(3.0, 3.0)]);
        let mut f = WaypointFollower::new(path, 0.5).unwrap();
        let h = f.target_heading(&Pose::new(0.0, 0.0, 0.0)).unwrap();
        assert!((h - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(f.index(), 1);
    }

    #[test]
    fn follower_reports_arrival() {
        let path = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.0), Vec2::new(5.0, 0.0)]);
        let mut f = WaypointFollower::new(path, 0.5).unwrap();
        assert_eq!(f.target_heading(&Pose::new(4.6, 0.1, 0.0)), Err(PlanError::PathExhausted));
    }

    #[test]
    fn square_path_headings_in_cardinal_order() {
        let corners = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (0.0, 1.0)];
        let path = PlannedPath::from_waypoints(corners.iter().map(|&(x, y)| Vec2::new(x, y)).collect());
        let mut f = WaypointFollower::new(path, 0.5).unwrap();
        let mut pose = Pose::new(0.0, 0.0, 0.0);
        let mut seen: Vec<i32> = Vec::new();
        let mut last_index = 0;
        while let Ok(h) = f.target_heading(&pose) {
            assert!(f.index() >= last_index);
            last_index = f.index();
            let q = (h / FRAC_PI_2).round() as i32;
            if seen.last() != Some(&q) {
                seen.push(q);
            }
            pose.x += 0.05 * h.cos();
            pose.y += 0.05 * h.sin();
        }
        let cardinal: Vec<i32> = seen.into_iter().filter(|q| q.abs() <= 2).collect();
        assert_eq!(&cardinal[..4], &[0, 1, 2, -1]);
    }
}
