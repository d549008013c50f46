use crate::geom::{Bounds, Pose, Vec2};

use super::lidar::{ScanFrame, MAX_RANGE};

pub const L_FREE: f64 = 0.4;
pub const L_OCC: f64 = 0.85;
pub const L_CLAMP: f64 = 5.0;

/// Below this magnitude a cell is exported as unknown.
const UNKNOWN_BAND: f64 = 0.1;

/// Log-odds occupancy map. Cell `(col, row)` covers
/// `origin + [col, col+1)·res × [row, row+1)·res`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
    pub log_odds: Vec<f64>,
}

impl OccupancyGrid {
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize) -> Self {
        Self { resolution, origin, width, height, log_odds: vec![0.0; width * height] }
    }

    /// Smallest grid of `resolution` covering `bounds` grown by `margin` on every side.
    pub fn covering(bounds: &Bounds, resolution: f64, margin: f64) -> Self {
        let origin = Vec2::new(bounds.min.x - margin, bounds.min.y - margin);
        let w = ((bounds.width() + 2.0 * margin) / resolution).ceil() as usize;
        let h = ((bounds.height() + 2.0 * margin) / resolution).ceil() as usize;
        Self::new(origin, resolution, w.max(1), h.max(1))
    }

    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((c as usize, r as usize))
    }

    /// Signed cell coordinates, possibly outside the grid.
    pub fn cell_unbounded(&self, p: Vec2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn in_grid(&self, c: i64, r: i64) -> bool {
        c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height
    }

    pub fn center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.log_odds[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.log_odds[row * self.width + col] = v.clamp(-L_CLAMP, L_CLAMP);
    }

    /// Log-odds at a world point; zero outside the grid.
    pub fn value_at(&self, p: Vec2) -> f64 {
        self.cell_of(p).map_or(0.0, |(c, r)| self.get(c, r))
    }

    pub fn is_occupied(&self, col: usize, row: usize) -> bool {
        self.get(col, row) > 0.0
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(
            self.origin,
            Vec2::new(
                self.origin.x + self.width as f64 * self.resolution,
                self.origin.y + self.height as f64 * self.resolution,
            ),
        )
    }

    /// Binary PGM (P5), rows written top (max y) first.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                let v = self.get(col, row);
                out.push(if v <= -UNKNOWN_BAND {
                    255
                } else if v >= UNKNOWN_BAND {
                    0
                } else {
                    128
                });
            }
        }
        out
    }

    pub fn sidecar(&self) -> String {
        format!(
            "resolution {}\norigin_x {}\norigin_y {}\nwidth {}\nheight {}\n",
            self.resolution, self.origin.x, self.origin.y, self.width, self.height
        )
    }
}

/// Integer cells on the line from `a` to `b`, both ends included.
pub(crate) fn bresenham(a: (i64, i64), b: (i64, i64), mut visit: impl FnMut(i64, i64) -> bool) {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if !visit(x, y) || (x, y) == b {
            return;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

const MARK_FREE: u8 = 1;
const MARK_HIT: u8 = 2;

/// Integrates one scan. Each cell changes at most once per scan and a hit
/// overrides free space, so the result does not depend on beam order.
/// Beams without a return clear space out to the sensor range.
pub fn update_occupancy(grid: &mut OccupancyGrid, pose: &Pose, scan: &ScanFrame) {
    update_occupancy_within(grid, pose, scan, MAX_RANGE);
}

/// [`update_occupancy`] using only the first `max_range` meters of each
/// beam: a longer return clears space up to `max_range` and marks no hit.
pub fn update_occupancy_within(grid: &mut OccupancyGrid, pose: &Pose, scan: &ScanFrame, max_range: f64) {
    let mut marks: Vec<(usize, u8)> = Vec::new();
    let origin = pose.position();
    let start = grid.cell_unbounded(origin);
    let start_inside = grid.in_grid(start.0, start.1);
    let w = grid.width;
    for (i, &r) in scan.ranges.iter().enumerate() {
        if r.is_nan() || r <= 0.0 {
            continue;
        }
        let hit = r.is_finite() && r <= max_range;
        let reach = if hit { r } else { max_range.min(MAX_RANGE) };
        let end_p = origin + Vec2::from_angle(pose.heading + scan.beam_angle(i)) * reach;
        let end = grid.cell_unbounded(end_p);
        bresenham(start, end, |c, rr| {
            if (c, rr) == end {
                return false;
            }
            if !grid.in_grid(c, rr) {
                // A line that starts inside the grid never re-enters it.
                return !start_inside;
            }
            marks.push((rr as usize * w + c as usize, MARK_FREE));
            true
        });
        if grid.in_grid(end.0, end.1) {
            marks.push((end.1 as usize * w + end.0 as usize, if hit { MARK_HIT } else { MARK_FREE }));
        }
    }
    // Sorting by (cell, mark) leaves the strongest mark last in each run.
    marks.sort_unstable();
    let mut k = 0;
    while k < marks.len() {
        let cell = marks[k].0;
        while k + 1 < marks.len() && marks[k + 1].0 == cell {
            k += 1;
        }
        let delta = if marks[k].1 == MARK_HIT { L_OCC } else { -L_FREE };
        grid.log_odds[cell] = (grid.log_odds[cell] + delta).clamp(-L_CLAMP, L_CLAMP);
        k += 1;
    }
}
