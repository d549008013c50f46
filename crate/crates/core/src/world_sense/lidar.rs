use std::f64::consts::PI;

use crate::geom::Pose;
use crate::rng::{gaussian, stream_rng, Stream};

use super::{WorldError, WorldModel};

/// Range bound of the scanner, meters.
pub const MAX_RANGE: f64 = 30.0;

/// Range value of a beam that saw nothing within [`MAX_RANGE`].
pub const NO_RETURN: f64 = f64::INFINITY;

const MIN_RANGE: f64 = 1e-3;

/// One sweep. Beam `i` points at `angle_min + i·(angle_max − angle_min)/(n − 1)`
/// in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFrame {
    pub stamp: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    pub n_beams: usize,
    pub ranges: Vec<f64>,
}

impl ScanFrame {
    pub fn beam_angle(&self, i: usize) -> f64 {
        if self.n_beams < 2 {
            return self.angle_min;
        }
        // Measured from the midpoint so that a symmetric layout gives exactly
        // mirrored angles for beams i and n-1-i.
        let mid = 0.5 * (self.angle_min + self.angle_max);
        let half = 0.5 * (self.angle_max - self.angle_min);
        let k = (self.n_beams - 1) as f64;
        mid + half * ((2 * i) as f64 - k) / k
    }

    pub fn valid_beams(&self) -> usize {
        self.ranges.iter().filter(|r| r.is_finite()).count()
    }

    pub fn min_range(&self) -> f64 {
        self.ranges.iter().copied().fold(NO_RETURN, f64::min)
    }

    /// Full-circle beam layout symmetric about the forward axis.
    pub fn full_circle(n_beams: usize) -> (f64, f64) {
        let half = PI / n_beams.max(1) as f64;
        (-PI + half, PI - half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarConfig {
    pub n_beams: usize,
    /// Range noise standard deviation, meters.
    pub sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { n_beams: 360, sigma: 0.02 }
    }
}

/// Seeded scanner.
#[derive(Debug, Clone)]
pub struct Lidar {
    pub config: LidarConfig,
    pub seed: u64,
}

impl Lidar {
    pub fn new(config: LidarConfig, seed: u64) -> Self {
        Self { config, seed }
    }

    pub fn scan(&self, pose: &Pose, world: &WorldModel, tick: u64, stamp: f64) -> Result<ScanFrame, WorldError> {
        if !world.bounds.contains(pose.position()) {
            return Err(WorldError::PoseOutOfBounds { x: pose.x, y: pose.y });
        }
        let n = self.config.n_beams;
        let (angle_min, angle_max) = ScanFrame::full_circle(n);
        let mut frame = ScanFrame { stamp, angle_min, angle_max, n_beams: n, ranges: Vec::with_capacity(n) };
        let mut rng = stream_rng(self.seed, Stream::Lidar, tick);
        let origin = pose.position();
        for i in 0..n {
            let a = pose.heading + frame.beam_angle(i);
            let noise = gaussian(&mut rng, self.config.sigma);
            let r = match world.raycast(origin, a) {
                Some(d) if d <= MAX_RANGE => (d + noise).clamp(MIN_RANGE, MAX_RANGE),
                _ => NO_RETURN,
            };
            frame.ranges.push(r);
        }
        Ok(frame)
    }
}

pub fn simulate_lidar(
    pose: &Pose,
    world: &WorldModel,
    n_beams: usize,
    seed: u64,
    tick: u64,
    sigma: f64,
) -> Result<ScanFrame, WorldError> {
    Lidar::new(LidarConfig { n_beams, sigma }, seed).scan(pose, world, tick, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Bounds, Segment, Vec2};

    fn bounds() -> Bounds {
        Bounds::new(Vec2::new(-20.0, -20.0), Vec2::new(20.0, 20.0))
    }

    #[test]
    fn empty_world_returns_nothing() {
        let w = WorldModel::empty(bounds());
        let s = simulate_lidar(&Pose::default(), &w, 360, 1, 0, 0.05).unwrap();
        assert_eq!(s.ranges.len(), 360);
        assert!(s.ranges.iter().all(|&r| r == NO_RETURN));
    }

    #[test]
    fn wall_straight_ahead() {
        let mut w = WorldModel::empty(bounds());
        w.segments.push(Segment::new(Vec2::new(5.0, -3.0), Vec2::new(5.0, 3.0)));
        // Odd beam count puts the middle beam exactly on the forward axis.
        let s = simulate_lidar(&Pose::default(), &w, 361, 1, 0, 0.0).unwrap();
        assert_eq!(s.beam_angle(180), 0.0);
        assert!((s.ranges[180] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_pose_outside_bounds() {
        let w = WorldModel::empty(bounds());
        assert!(matches!(
            simulate_lidar(&Pose::new(50.0, 0.0, 0.0), &w, 10, 0, 0, 0.0),
            Err(WorldError::PoseOutOfBounds { .. })
        ));
    }

    #[test]
    fn far_walls_are_beyond_range() {
        let b = Bounds::new(Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0));
        let mut w = WorldModel::empty(b);
        w.segments.push(Segment::new(Vec2::new(40.0, -3.0), Vec2::new(40.0, 3.0)));
        let s = simulate_lidar(&Pose::default(), &w, 361, 1, 0, 0.0).unwrap();
        assert_eq!(s.ranges[180], NO_RETURN);
    }

    #[test]
    fn ranges_stay_inside_sensor_limits() {
        let mut w = WorldModel::empty(bounds());
        w.add_box(Vec2::new(-0.01, -5.0), Vec2::new(0.05, 5.0));
        let s = simulate_lidar(&Pose::new(-0.02, 0.0, 0.0), &w, 360, 3, 0, 0.5).unwrap();
        assert!(s.ranges.iter().all(|&r| r == NO_RETURN || (r > 0.0 && r <= MAX_RANGE)));
    }
}
