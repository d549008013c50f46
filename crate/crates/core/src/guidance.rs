//! Closed-loop steering through stride modulation.
//!
//! The controller lengthens the stride of the outer leg (the right leg for a
//! left turn) in proportion to the heading error. A modulation is decided
//! once per swing window, when the outer leg has been swinging for
//! `onset_guard` seconds, and held until `release_margin` before the
//! recognizer's predicted heel strike. Inside the deadband both ropes go
//! slack.

use thiserror::Error;

use crate::gait_model::{CoarsePhase, Leg};
use crate::gait_sense::GaitEstimate;
use crate::geom::wrap_angle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tension {
    Relaxed,
    Damped,
    Assist,
}

impl Tension {
    pub fn name(self) -> &'static str {
        match self {
            Tension::Relaxed => "Relaxed",
            Tension::Damped => "Damped",
            Tension::Assist => "Assist",
        }
    }

    pub fn from_name(s: &str) -> Option<Tension> {
        [Tension::Relaxed, Tension::Damped, Tension::Assist]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AudioCue {
    None,
    TurnLeft,
    TurnRight,
    Obstacle,
}

impl AudioCue {
    pub fn name(self) -> &'static str {
        match self {
            AudioCue::None => "None",
            AudioCue::TurnLeft => "TurnLeft",
            AudioCue::TurnRight => "TurnRight",
            AudioCue::Obstacle => "Obstacle",
        }
    }

    pub fn from_name(s: &str) -> Option<AudioCue> {
        [AudioCue::None, AudioCue::TurnLeft, AudioCue::TurnRight, AudioCue::Obstacle]
            .into_iter()
            .find(|a| a.name() == s)
    }
}

/// Actuator-side command for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceCommand {
    pub left_tension: Tension,
    pub right_tension: Tension,
    pub left_mod: f64,
    pub right_mod: f64,
    pub audio: AudioCue,
    /// Leg tightened and waiting for its swing window.
    pub pending: Option<Leg>,
}

impl GuidanceCommand {
    pub const RELAXED: GuidanceCommand = GuidanceCommand {
        left_tension: Tension::Relaxed,
        right_tension: Tension::Relaxed,
        left_mod: 0.0,
        right_mod: 0.0,
        audio: AudioCue::None,
        pending: None,
    };

    fn assist(leg: Leg, modulation: f64, audio: AudioCue, pending: bool) -> Self {
        let (lt, rt, lm, rm) = match leg {
            Leg::Left => (Tension::Assist, Tension::Damped, modulation, 0.0),
            Leg::Right => (Tension::Damped, Tension::Assist, 0.0, modulation),
        };
        GuidanceCommand {
            left_tension: lt,
            right_tension: rt,
            left_mod: lm,
            right_mod: rm,
            audio,
            pending: pending.then_some(leg),
        }
    }

    pub fn tension(&self, leg: Leg) -> Tension {
        match leg {
            Leg::Left => self.left_tension,
            Leg::Right => self.right_tension,
        }
    }

    pub fn modulation(&self, leg: Leg) -> f64 {
        match leg {
            Leg::Left => self.left_mod,
            Leg::Right => self.right_mod,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Modulation per radian of heading error.
    pub kp: f64,
    /// Errors at or below this magnitude leave both ropes relaxed, radians.
    pub deadband: f64,
    /// Errors above this magnitude also raise a turn cue, radians.
    pub audio_threshold: f64,
    pub mod_max: f64,
    /// Minimum time in detected swing before assisting, seconds.
    pub onset_guard: f64,
    /// Assist is released this long before predicted heel strike, seconds.
    pub release_margin: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kp: 0.3,
            deadband: 2f64.to_radians(),
            audio_threshold: 45f64.to_radians(),
            mod_max: 0.3,
            onset_guard: 0.02,
            release_margin: 0.02,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        if !(self.kp > 0.0 && self.deadband > 0.0 && self.audio_threshold > 0.0 && self.mod_max > 0.0) {
            return Err(GuidanceError::InvalidConfig("gains and thresholds must be positive"));
        }
        if self.deadband >= self.audio_threshold {
            return Err(GuidanceError::InvalidConfig("deadband must be below the audio threshold"));
        }
        if self.onset_guard < 0.0 || self.release_margin < 0.0 {
            return Err(GuidanceError::InvalidConfig("guard bands must be non-negative"));
        }
        Ok(())
    }
}

/// Outer leg for a signed heading error (positive = turn left).
pub fn outer_leg(heading_error: f64) -> Leg {
    if heading_error > 0.0 {
        Leg::Right
    } else {
        Leg::Left
    }
}

fn leg_index(leg: Leg) -> usize {
    match leg {
        Leg::Left => 0,
        Leg::Right => 1,
    }
}

/// Proportional steering controller with a per-leg assist latch.
#[derive(Debug, Clone)]
pub struct SteeringController {
    cfg: ControllerConfig,
    hold: Option<(Leg, f64)>,
    decided: [bool; 2],
}

impl SteeringController {
    pub fn new(cfg: ControllerConfig) -> Result<Self, GuidanceError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            hold: None,
            decided: [false; 2],
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    fn audio_for(&self, err: f64) -> AudioCue {
        if err.abs() > self.cfg.audio_threshold {
            if err > 0.0 {
                AudioCue::TurnLeft
            } else {
                AudioCue::TurnRight
            }
        } else {
            AudioCue::None
        }
    }

    fn window_open(&self, gait: &GaitEstimate, leg: Leg) -> bool {
        let l = gait.leg(leg);
        if l.phase != CoarsePhase::Swing {
            return false;
        }
        let t = gait.t;
        let started = l.swing_since.map_or(false, |s| t - s >= self.cfg.onset_guard - 1e-9);
        let before_contact = l.contact_hat.map_or(true, |c| c - t > self.cfg.release_margin);
        started && before_contact
    }

    pub fn steering_update(&mut self, heading_error: f64, gait: &GaitEstimate) -> GuidanceCommand {
        let err = wrap_angle(heading_error);
        let audio = self.audio_for(err);

        for leg in [Leg::Left, Leg::Right] {
            if gait.leg(leg).phase == CoarsePhase::Stance {
                self.decided[leg_index(leg)] = false;
            }
        }

        if let Some((leg, m)) = self.hold {
            let l = gait.leg(leg);
            let still = l.phase == CoarsePhase::Swing
                && l.contact_hat.map_or(true, |c| c - gait.t > self.cfg.release_margin);
            if still {
                return GuidanceCommand::assist(leg, m, audio, false);
            }
            self.hold = None;
        }

        if err.abs() <= self.cfg.deadband {
            return GuidanceCommand { audio, ..GuidanceCommand::RELAXED };
        }

        let outer = outer_leg(err);
        if !self.decided[leg_index(outer)] && self.window_open(gait, outer) {
            let m = (self.cfg.kp * err.abs()).min(self.cfg.mod_max);
            self.decided[leg_index(outer)] = true;
            self.hold = Some((outer, m));
            return GuidanceCommand::assist(outer, m, audio, false);
        }
        GuidanceCommand::assist(outer, 0.0, audio, true)
    }

    /// Holds `reference` using the IMU heading as feedback.
    pub fn straight_walk_regulator(
        &mut self,
        imu_heading: f64,
        reference: f64,
        gait: &GaitEstimate,
    ) -> GuidanceCommand {
        self.steering_update(wrap_angle(reference - imu_heading), gait)
    }
}

/// Single-shot form of [`SteeringController::steering_update`] with no
/// latch history.
pub fn steering_update(cfg: &ControllerConfig, heading_error: f64, gait: &GaitEstimate) -> GuidanceCommand {
    let mut c = SteeringController {
        cfg: cfg.clone(),
        hold: None,
        decided: [false; 2],
    };
    c.steering_update(heading_error, gait)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_sense::LegEstimate;

    fn gait(t: f64, left: CoarsePhase, right: CoarsePhase) -> GaitEstimate {
        let leg = |p: CoarsePhase| LegEstimate {
            phase: p,
            swing_since: (p == CoarsePhase::Swing).then_some(t - 0.1),
            contact_hat: (p == CoarsePhase::Swing).then_some(t + 0.3),
            ..Default::default()
        };
        GaitEstimate {
            t,
            left: leg(left),
            right: leg(right),
            cadence_hat: 1.78,
            stride_hat: 0.45,
            step_count: 10,
        }
    }

    #[test]
    fn zero_error_relaxes_both_ropes() {
        let cmd = steering_update(
            &ControllerConfig::default(),
            0.0,
            &gait(1.0, CoarsePhase::Stance, CoarsePhase::Swing),
        );
        assert_eq!(cmd, GuidanceCommand::RELAXED);
    }

    #[test]
    fn large_left_turn_saturates_right_leg() {
        let cfg = ControllerConfig::default();
        let cmd = steering_update(&cfg, 90f64.to_radians(), &gait(1.0, CoarsePhase::Stance, CoarsePhase::Swing));
        assert_eq!(cmd.right_mod, cfg.mod_max);
        assert_eq!(cmd.right_tension, Tension::Assist);
        assert_eq!(cmd.left_tension, Tension::Damped);
        assert_eq!(cmd.left_mod, 0.0);
        assert_eq!(cmd.audio, AudioCue::TurnLeft);
    }

    #[test]
    fn outer_leg_in_stance_waits_for_swing() {
        let cfg = ControllerConfig::default();
        let mut c = SteeringController::new(cfg).unwrap();
        let cmd = c.steering_update(10f64.to_radians(), &gait(1.0, CoarsePhase::Swing, CoarsePhase::Stance));
        assert_eq!(cmd.right_mod, 0.0);
        assert_eq!(cmd.left_mod, 0.0);
        assert_eq!(cmd.pending, Some(Leg::Right));
        assert_eq!(cmd.right_tension, Tension::Assist);
        assert_eq!(cmd.audio, AudioCue::None);
        // Once the right leg swings the held modulation appears.
        let cmd = c.steering_update(10f64.to_radians(), &gait(1.5, CoarsePhase::Stance, CoarsePhase::Swing));
        assert!((cmd.right_mod - 0.3 * 10f64.to_radians()).abs() < 1e-12);
        assert_eq!(cmd.pending, None);
    }

    #[test]
    fn right_turn_uses_left_leg() {
        let cmd = steering_update(
            &ControllerConfig::default(),
            -20f64.to_radians(),
            &gait(1.0, CoarsePhase::Swing, CoarsePhase::Stance),
        );
        assert!(cmd.left_mod > 0.0);
        assert_eq!(cmd.right_mod, 0.0);
        assert_eq!(cmd.left_tension, Tension::Assist);
    }

    #[test]
    fn hold_is_zero_order_across_the_swing() {
        let mut c = SteeringController::new(ControllerConfig::default()).unwrap();
        let g = gait(1.0, CoarsePhase::Stance, CoarsePhase::Swing);
        let first = c.steering_update(30f64.to_radians(), &g);
        let mut g2 = g;
        g2.t = 1.1;
        let second = c.steering_update(5f64.to_radians(), &g2);
        assert_eq!(first.right_mod, second.right_mod);
        // Past the release point the hold ends and no second decision is made
        // within the same swing.
        let mut g3 = g;
        g3.t = 1.29;
        let third = c.steering_update(30f64.to_radians(), &g3);
        assert_eq!(third.right_mod, 0.0);
        assert_eq!(third.pending, Some(Leg::Right));
    }

    #[test]
    fn straight_regulator_corrects_drift() {
        let mut c = SteeringController::new(ControllerConfig::default()).unwrap();
        let g = gait(2.0, CoarsePhase::Stance, CoarsePhase::Swing);
        assert_eq!(c.straight_walk_regulator(0.3, 0.3, &g), GuidanceCommand::RELAXED);
        // Drifted 5° to the right: steer left with the right leg.
        let cmd = c.straight_walk_regulator(-5f64.to_radians(), 0.0, &g);
        assert!(cmd.right_mod > 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = ControllerConfig { deadband: 1.0, audio_threshold: 0.5, ..Default::default() };
        assert!(SteeringController::new(bad).is_err());
        assert!(SteeringController::new(ControllerConfig { kp: 0.0, ..Default::default() }).is_err());
    }

    proptest::proptest! {
        #[test]
        fn gain_scaling_never_changes_leg_choice(err in -3.1f64..3.1, c in 0.01f64..50.0, right_swing in proptest::bool::ANY) {
            let g = if right_swing {
                gait(1.0, CoarsePhase::Stance, CoarsePhase::Swing)
            } else {
                gait(1.0, CoarsePhase::Swing, CoarsePhase::Stance)
            };
            let base = ControllerConfig::default();
            let scaled = ControllerConfig { kp: base.kp * c, ..base.clone() };
            let a = steering_update(&base, err, &g);
            let b = steering_update(&scaled, err, &g);
            for leg in [Leg::Left, Leg::Right] {
                proptest::prop_assert_eq!(a.tension(leg) == Tension::Assist, b.tension(leg) == Tension::Assist);
            }
            // at most one leg assisted, and modulation implies assist
            proptest::prop_assert!(!(a.left_tension == Tension::Assist && a.right_tension == Tension::Assist));
            for leg in [Leg::Left, Leg::Right] {
                if a.modulation(leg) != 0.0 {
                    proptest::prop_assert_eq!(a.tension(leg), Tension::Assist);
                }
            }
        }
    }
}
