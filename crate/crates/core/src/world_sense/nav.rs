use crate::gait_sense::GaitEstimate;
use crate::geom::{Pose, Vec2};

/// Consecutive ticks needed to change mode.
pub const MODE_SWITCH_TICKS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavMode {
    OutdoorGps,
    IndoorSlam,
}

impl NavMode {
    pub fn name(self) -> &'static str {
        match self {
            NavMode::OutdoorGps => "OutdoorGps",
            NavMode::IndoorSlam => "IndoorSlam",
        }
    }

    pub fn from_name(s: &str) -> Option<NavMode> {
        match s {
            "OutdoorGps" => Some(NavMode::OutdoorGps),
            "IndoorSlam" => Some(NavMode::IndoorSlam),
            _ => None,
        }
    }
}

/// Fused pose belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavEstimate {
    pub mode: NavMode,
    pub pose_hat: Pose,
    pub confidence: f64,
    pub step_count_used: u64,
    fix_streak: u32,
    miss_streak: u32,
}

impl NavEstimate {
    pub fn new(mode: NavMode, pose_hat: Pose) -> Self {
        Self { mode, pose_hat, confidence: 0.0, step_count_used: 0, fix_streak: 0, miss_streak: 0 }
    }
}

/// Advances the belief by one stride per step not yet consumed.
pub fn dead_reckon(nav: &NavEstimate, gait: &GaitEstimate, heading_hat: f64) -> NavEstimate {
    let mut out = *nav;
    let new_steps = gait.step_count.saturating_sub(nav.step_count_used);
    if new_steps > 0 {
        let d = Vec2::from_angle(heading_hat) * (gait.stride_hat * new_steps as f64);
        out.pose_hat.x += d.x;
        out.pose_hat.y += d.y;
        out.step_count_used = gait.step_count;
    }
    out.pose_hat.heading = heading_hat;
    out
}

/// Hysteresis between GPS and SLAM positioning.
pub fn mode_switch(nav: &NavEstimate, gps_fix_present: bool) -> NavEstimate {
    let mut out = *nav;
    if gps_fix_present {
        out.fix_streak += 1;
        out.miss_streak = 0;
        if out.fix_streak >= MODE_SWITCH_TICKS {
            out.mode = NavMode::OutdoorGps;
        }
    } else {
        out.miss_streak += 1;
        out.fix_streak = 0;
        if out.miss_streak >= MODE_SWITCH_TICKS {
            out.mode = NavMode::IndoorSlam;
        }
    }
    out
}

/// Fixed-gain blend of a GPS fix into the dead-reckoned position.
pub fn fuse_gps(nav: &NavEstimate, fix: Vec2, gain: f64) -> NavEstimate {
    let mut out = *nav;
    out.pose_hat.x = gain * fix.x + (1.0 - gain) * nav.pose_hat.x;
    out.pose_hat.y = gain * fix.y + (1.0 - gain) * nav.pose_hat.y;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn gait(steps: u64, stride: f64) -> GaitEstimate {
        GaitEstimate { step_count: steps, stride_hat: stride, ..Default::default() }
    }

    #[test]
    fn no_new_steps_keeps_position() {
        let nav = NavEstimate::new(NavMode::IndoorSlam, Pose::new(1.0, 2.0, 0.0));
        let out = dead_reckon(&nav, &gait(0, 0.45), 0.0);
        assert_eq!(out.pose_hat.position(), nav.pose_hat.position());
    }

    #[test]
    fn ten_steps_forward() {
        let nav = NavEstimate::new(NavMode::IndoorSlam, Pose::default());
        let out = dead_reckon(&nav, &gait(10, 0.45), 0.0);
        assert!((out.pose_hat.x - 4.5).abs() < 1e-12);
        assert_eq!(out.step_count_used, 10);
    }

    #[test]
    fn square_walk_closes() {
        let mut nav = NavEstimate::new(NavMode::IndoorSlam, Pose::default());
        let mut steps = 0;
        for side in 0..4 {
            let h = side as f64 * FRAC_PI_2;
            for _ in 0..10 {
                steps += 1;
                nav = dead_reckon(&nav, &gait(steps, 0.45), h);
            }
        }
        assert!(nav.pose_hat.position().norm() < 1e-6);
    }

    #[test]
    fn five_fixes_switch_outdoors() {
        let mut nav = NavEstimate::new(NavMode::IndoorSlam, Pose::default());
        for i in 1..=5 {
            nav = mode_switch(&nav, true);
            let expect = if i < 5 { NavMode::IndoorSlam } else { NavMode::OutdoorGps };
            assert_eq!(nav.mode, expect, "tick {i}");
        }
    }

    #[test]
    fn alternating_never_switches() {
        for start in [NavMode::IndoorSlam, NavMode::OutdoorGps] {
            let mut nav = NavEstimate::new(start, Pose::default());
            for i in 0..100 {
                nav = mode_switch(&nav, i % 2 == 0);
                assert_eq!(nav.mode, start);
            }
        }
    }

    #[test]
    fn gps_blend() {
        let nav = NavEstimate::new(NavMode::OutdoorGps, Pose::new(10.0, 0.0, 0.0));
        let out = fuse_gps(&nav, Vec2::new(0.0, 5.0), 0.2);
        assert!((out.pose_hat.x - 8.0).abs() < 1e-12);
        assert!((out.pose_hat.y - 1.0).abs() < 1e-12);
    }
}
