use std::cmp::Ordering;

use crate::geom::{Pose, Vec2};

use super::lidar::ScanFrame;
use super::occupancy::OccupancyGrid;
use super::WorldError;

/// Search window and scoring options of the correlative matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeConfig {
    pub xy_step: f64,
    /// Offsets per side, so the window spans `2·xy_steps + 1` values per axis.
    pub xy_steps: i32,
    pub theta_step: f64,
    pub theta_steps: i32,
    /// Use every k-th beam when scoring.
    pub beam_stride: usize,
    pub min_valid_beams: usize,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            xy_step: 0.05,
            xy_steps: 4,
            theta_step: 2f64.to_radians(),
            theta_steps: 5,
            beam_stride: 1,
            min_valid_beams: 10,
        }
    }
}

/// Candidate offsets in tie-break order: smallest `|Δθ|`, then smallest
/// `|Δx| + |Δy|`, then the signed offsets.
fn candidates(cfg: &LocalizeConfig) -> Vec<(i32, i32, i32)> {
    let mut v = Vec::new();
    for t in -cfg.theta_steps..=cfg.theta_steps {
        for x in -cfg.xy_steps..=cfg.xy_steps {
            for y in -cfg.xy_steps..=cfg.xy_steps {
                v.push((t, x, y));
            }
        }
    }
    v.sort_by_key(|&(t, x, y)| (t.abs(), x.abs() + y.abs(), t, x, y));
    v
}

/// Exhaustive scan matching around `prior`. Returns the best pose and a
/// confidence in [0, 1] measuring how far the best score stands above the
/// window average.
pub fn localize(
    grid: &OccupancyGrid,
    prior: &Pose,
    scan: &ScanFrame,
    cfg: &LocalizeConfig,
) -> Result<(Pose, f64), WorldError> {
    let valid = scan.valid_beams();
    if valid < cfg.min_valid_beams {
        return Err(WorldError::DegenerateScan { valid, needed: cfg.min_valid_beams });
    }
    let beams: Vec<(f64, f64)> = scan
        .ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .step_by(cfg.beam_stride.max(1))
        .map(|(i, &r)| (scan.beam_angle(i), r))
        .collect();

    let mut best: Option<((i32, i32, i32), f64)> = None;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let cands = candidates(cfg);
    let mut endpoints = Vec::with_capacity(beams.len());
    let mut last_t = None;
    for &(t, x, y) in &cands {
        if last_t != Some(t) {
            let h = prior.heading + t as f64 * cfg.theta_step;
            endpoints.clear();
            endpoints.extend(beams.iter().map(|&(a, r)| Vec2::from_angle(h + a) * r));
            last_t = Some(t);
        }
        let origin = Vec2::new(
            prior.x + x as f64 * cfg.xy_step,
            prior.y + y as f64 * cfg.xy_step,
        );
        let score: f64 = endpoints.iter().map(|&e| grid.value_at(origin + e)).sum();
        sum += score;
        min = min.min(score);
        match best {
            Some((_, b)) if score.partial_cmp(&b) != Some(Ordering::Greater) => {}
            _ => best = Some(((t, x, y), score)),
        }
    }
    let ((t, x, y), best_score) = best.expect("search window is never empty");
    let mean = sum / cands.len() as f64;
    let confidence = if best_score > min {
        ((best_score - mean) / (best_score - min)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let pose = Pose::new(
        prior.x + x as f64 * cfg.xy_step,
        prior.y + y as f64 * cfg.xy_step,
        crate::geom::wrap_angle(prior.heading + t as f64 * cfg.theta_step),
    );
    Ok((pose, confidence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Bounds;
    use crate::world_sense::{simulate_lidar, update_occupancy, WorldModel};
    use proptest::prelude::*;

    // Walls sit mid-cell; edges exactly on cell boundaries make hit cells
    // depend on rounding.
    fn hallway() -> WorldModel {
        let b = Bounds::new(Vec2::new(-1.0, -2.0), Vec2::new(21.0, 2.0));
        let mut w = WorldModel::empty(b);
        w.add_box(Vec2::new(0.04, -1.03), Vec2::new(20.04, 1.04));
        w.add_box(Vec2::new(6.04, 0.63), Vec2::new(6.54, 1.04));
        w.add_box(Vec2::new(12.04, -1.03), Vec2::new(12.36, -0.73));
        w
    }

    fn mapped(w: &WorldModel) -> OccupancyGrid {
        let mut g = OccupancyGrid::covering(&w.bounds, 0.1, 0.5);
        for i in 0..40 {
            let p = Pose::new(1.0 + 0.45 * i as f64, 0.0, 0.0);
            let s = simulate_lidar(&p, w, 360, 9, i, 0.0).unwrap();
            update_occupancy(&mut g, &p, &s);
        }
        g
    }

    /// Fully converged map: wall cells saturated occupied, the rest free.
    fn rasterized(w: &WorldModel) -> OccupancyGrid {
        let mut g = OccupancyGrid::covering(&w.bounds, 0.1, 0.5);
        g.log_odds.fill(-5.0);
        for s in &w.segments {
            let n = (s.length() / 0.01).ceil() as usize;
            for k in 0..=n {
                let p = s.a + (s.b - s.a) * (k as f64 / n as f64);
                if let Some((c, r)) = g.cell_of(p) {
                    g.set(c, r, 5.0);
                }
            }
        }
        g
    }

    #[test]
    fn prior_at_truth_is_kept() {
        let w = hallway();
        let g = rasterized(&w);
        let truth = Pose::new(7.03, 0.02, 0.0);
        let s = simulate_lidar(&truth, &w, 360, 1, 0, 0.0).unwrap();
        let (p, c) = localize(&g, &truth, &s, &LocalizeConfig::default()).unwrap();
        assert_eq!(p, truth);
        assert!(c > 0.5, "{c}");
    }

    #[test]
    fn offset_prior_is_corrected() {
        let w = hallway();
        let g = mapped(&w);
        let truth = Pose::new(7.03, 0.02, 0.0);
        let s = simulate_lidar(&truth, &w, 360, 1, 0, 0.02).unwrap();
        let prior = Pose::new(truth.x + 0.10, truth.y, truth.heading);
        let (p, _) = localize(&g, &prior, &s, &LocalizeConfig::default()).unwrap();
        assert!(p.position().dist(truth.position()) <= 0.05, "{p:?}");
    }

    #[test]
    fn empty_grid_has_no_confidence() {
        let w = hallway();
        let g = OccupancyGrid::covering(&w.bounds, 0.1, 0.5);
        let prior = Pose::new(3.0, 0.0, 0.0);
        let s = simulate_lidar(&prior, &w, 360, 1, 0, 0.0).unwrap();
        let (p, c) = localize(&g, &prior, &s, &LocalizeConfig::default()).unwrap();
        assert_eq!(p, prior);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn degenerate_scan_rejected() {
        let g = OccupancyGrid::new(Vec2::new(0.0, 0.0), 0.1, 10, 10);
        let mut ranges = vec![f64::INFINITY; 360];
        for r in ranges.iter_mut().take(9) {
            *r = 1.0;
        }
        let (angle_min, angle_max) = ScanFrame::full_circle(360);
        let s = ScanFrame { stamp: 0.0, angle_min, angle_max, n_beams: 360, ranges };
        assert_eq!(
            localize(&g, &Pose::default(), &s, &LocalizeConfig::default()),
            Err(WorldError::DegenerateScan { valid: 9, needed: 10 })
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn result_stays_in_window(x in 2.0f64..18.0, y in -0.6f64..0.6, h in -3.0f64..3.0, dx in -0.5f64..0.5, dy in -0.5f64..0.5) {
            let w = hallway();
            let g = mapped(&w);
            let truth = Pose::new(x, y, h);
            prop_assume!(w.clearance(truth.position()) > 0.05);
            let s = simulate_lidar(&truth, &w, 120, 3, 0, 0.02).unwrap();
            let prior = Pose::new(x + dx, y + dy, h);
            let cfg = LocalizeConfig::default();
            let (p, c) = localize(&g, &prior, &s, &cfg).unwrap();
            prop_assert!((p.x - prior.x).abs() <= 0.2 + 1e-9);
            prop_assert!((p.y - prior.y).abs() <= 0.2 + 1e-9);
            prop_assert!(crate::geom::wrap_angle(p.heading - prior.heading).abs() <= 10f64.to_radians() + 1e-9);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
