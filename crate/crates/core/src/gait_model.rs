//! Ground-truth walker kinematics.
//!
//! Each leg runs through an eight-phase gait cycle. The thigh angle follows a
//! periodic profile, the traction rope length follows from the thigh angle
//! through the rigid-body rope geometry, and step events convert per-leg
//! stride differences into heading change (a differential-drive analogue with
//! the hip width as the wheel base).
//!
//! Phase fraction 0 is initial contact (heel strike). One gait cycle covers
//! two steps, one per leg, so each leg's phase advances at `cadence / 2`
//! cycles per second.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::gait_sense::RopeSample;
use crate::geom::{wrap_angle, Vec2};
use crate::rng::{gaussian, stream_rng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("modulation {value} exceeds the limit {limit}")]
    ModulationOutOfRange { value: f64, limit: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("invalid gait parameter: {0}")]
    InvalidParameter(&'static str),
}

/// The eight sub-phases of one leg's gait cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GaitPhase {
    InitialContact,
    LoadingResponse,
    MidStance,
    TerminalStance,
    PreSwing,
    InitialSwing,
    MidSwing,
    TerminalSwing,
}

/// Foot-on-ground versus foot-in-air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoarsePhase {
    Stance,
    Swing,
}

impl GaitPhase {
    pub const ALL: [GaitPhase; 8] = [
        GaitPhase::InitialContact,
        GaitPhase::LoadingResponse,
        GaitPhase::MidStance,
        GaitPhase::TerminalStance,
        GaitPhase::PreSwing,
        GaitPhase::InitialSwing,
        GaitPhase::MidSwing,
        GaitPhase::TerminalSwing,
    ];

    pub fn coarse(self) -> CoarsePhase {
        match self {
            GaitPhase::InitialContact
            | GaitPhase::LoadingResponse
            | GaitPhase::MidStance
            | GaitPhase::TerminalStance
            | GaitPhase::PreSwing => CoarsePhase::Stance,
            GaitPhase::InitialSwing | GaitPhase::MidSwing | GaitPhase::TerminalSwing => {
                CoarsePhase::Swing
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GaitPhase::InitialContact => "InitialContact",
            GaitPhase::LoadingResponse => "LoadingResponse",
            GaitPhase::MidStance => "MidStance",
            GaitPhase::TerminalStance => "TerminalStance",
            GaitPhase::PreSwing => "PreSwing",
            GaitPhase::InitialSwing => "InitialSwing",
            GaitPhase::MidSwing => "MidSwing",
            GaitPhase::TerminalSwing => "TerminalSwing",
        }
    }

    pub fn from_name(s: &str) -> Option<GaitPhase> {
        GaitPhase::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Cycle-fraction boundaries of the eight phases.
///
/// `bounds[i]..bounds[i + 1]` is the interval of `GaitPhase::ALL[i]`;
/// `bounds[0] = 0` and `bounds[8] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    bounds: [f64; 9],
}

impl Default for PhaseTable {
    fn default() -> Self {
        Self {
            bounds: [0.0, 0.02, 0.10, 0.30, 0.50, 0.60, 0.73, 0.87, 1.0],
        }
    }
}

impl PhaseTable {
    pub fn new(bounds: [f64; 9]) -> Result<Self, GaitError> {
        if bounds[0] != 0.0 || bounds[8] != 1.0 {
            return Err(GaitError::InvalidParameter("phase table must span [0, 1]"));
        }
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GaitError::InvalidParameter("phase bounds must increase"));
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[f64; 9] {
        &self.bounds
    }

    /// The unique phase whose half-open interval contains `fraction`.
    pub fn phase_at(&self, fraction: f64) -> GaitPhase {
        let f = fraction.rem_euclid(1.0);
        let idx = self.bounds[1..8].iter().take_while(|&&b| f >= b).count();
        GaitPhase::ALL[idx]
    }

    /// Fraction at which the swing window opens (start of initial swing).
    pub fn swing_onset(&self) -> f64 {
        self.bounds[5]
    }
}

/// Periodic thigh-angle profile: cosine interpolation between control
/// points `(fraction, radians)`. The first point sits at 0, the last at 1,
/// and both carry the same angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ThighProfile {
    points: Vec<(f64, f64)>,
}

impl Default for ThighProfile {
    fn default() -> Self {
        Self {
            points: vec![(0.0, 0.35), (0.50, -0.17), (0.75, 0.44), (1.0, 0.35)],
        }
    }
}

impl ThighProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, GaitError> {
        if points.len() < 2 {
            return Err(GaitError::InvalidParameter("profile needs at least two points"));
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if first.0 != 0.0 || last.0 != 1.0 || first.1 != last.1 {
            return Err(GaitError::InvalidParameter(
                "profile must start at 0, end at 1 and be periodic",
            ));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(GaitError::InvalidParameter("profile fractions must increase"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Thigh angle at a cycle fraction. The interpolant has zero slope at
    /// every control point, which keeps value and slope continuous across
    /// the 1 → 0 wrap.
    pub fn angle(&self, fraction: f64) -> f64 {
        let f = fraction.rem_euclid(1.0);
        let i = self
            .points
            .windows(2)
            .position(|w| f < w[1].0)
            .unwrap_or(self.points.len() - 2);
        let (f0, a0) = self.points[i];
        let (f1, a1) = self.points[i + 1];
        let u = (f - f0) / (f1 - f0);
        let w = 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
        a0 + (a1 - a0) * w
    }

    /// Fraction of the largest control-point angle (peak flexion).
    pub fn peak_flexion_fraction(&self) -> f64 {
        self.points
            .iter()
            .take(self.points.len() - 1)
            .fold((0.0, f64::NEG_INFINITY), |acc, &(f, a)| if a > acc.1 { (f, a) } else { acc })
            .0
    }
}

/// Default-profile shorthand.
pub fn thigh_angle_profile(phase_fraction: f64) -> f64 {
    ThighProfile::default().angle(phase_fraction)
}

/// Rope attachment geometry of one leg, sagittal plane, x forward, y up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RopeGeometry {
    /// Hip joint to thigh attachment, hip frame at zero thigh angle.
    pub l1: Vec2,
    /// Motor anchor to hip joint, body frame.
    pub l2: Vec2,
}

impl Default for RopeGeometry {
    /// Motor on the front of the waist above the hip; rope tied to the front
    /// of the mid-thigh. Flexion shortens the rope.
    fn default() -> Self {
        Self {
            l1: Vec2::new(0.07, -0.20),
            l2: Vec2::new(-0.12, -0.05),
        }
    }
}

impl RopeGeometry {
    pub fn new(l1: Vec2, l2: Vec2) -> Result<Self, GaitError> {
        if !(l1.norm() > 0.0) || !(l2.norm() > 0.0) {
            return Err(GaitError::InvalidParameter("rope geometry vectors must be non-zero"));
        }
        Ok(Self { l1, l2 })
    }
}

/// Rope length `|R(θ)·l1 + l2|` for thigh angle `theta` (flexion positive).
pub fn rope_length(theta: f64, geom: &RopeGeometry) -> f64 {
    (geom.l1.rotate(theta) + geom.l2).norm()
}

/// Inverse of [`rope_length`] on `[lo, hi]`, assuming it is monotone there.
/// Out-of-range lengths clamp to the nearer end.
pub fn thigh_angle_from_rope(length: f64, geom: &RopeGeometry, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo.max(-FRAC_PI_2), hi.min(FRAC_PI_2));
    let la = rope_length(a, geom);
    let lb = rope_length(b, geom);
    let decreasing = lb < la;
    let (lmin, lmax) = if decreasing { (lb, la) } else { (la, lb) };
    if length <= lmin {
        return if decreasing { b } else { a };
    }
    if length >= lmax {
        return if decreasing { a } else { b };
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let lm = rope_length(m, geom);
        if (lm > length) == decreasing {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::Left => Leg::Right,
            Leg::Right => Leg::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegState {
    /// Position in the gait cycle, `[0, 1)`.
    pub phase_fraction: f64,
    /// Thigh angle in radians, flexion positive.
    pub thigh_angle: f64,
    /// Stride committed at this leg's most recent step event.
    pub stride_length: f64,
    pub phase: GaitPhase,
    /// Stride modulation currently shaping this leg's swing; latched while
    /// the leg swings and held until its next swing opens.
    pub modulation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianState {
    pub position: Vec2,
    /// Radians, wrapped to (−π, π].
    pub heading: f64,
    pub left: LegState,
    pub right: LegState,
    /// Steps per second.
    pub cadence: f64,
    pub base_stride: f64,
}

impl PedestrianState {
    pub fn leg(&self, leg: Leg) -> &LegState {
        match leg {
            Leg::Left => &self.left,
            Leg::Right => &self.right,
        }
    }

    fn leg_mut(&mut self, leg: Leg) -> &mut LegState {
        match leg {
            Leg::Left => &mut self.left,
            Leg::Right => &mut self.right,
        }
    }

    /// Forward speed implied by the legs' committed strides.
    pub fn speed(&self) -> f64 {
        self.cadence * 0.5 * (self.left.stride_length + self.right.stride_length)
    }
}

/// A heel strike: the leg leaves swing and commits its stride.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub leg: Leg,
    /// Time of the event measured from the start of the advance call.
    pub offset: f64,
    pub stride: f64,
    /// Heading increment applied at this event.
    pub heading_change: f64,
}

/// Walker parameters that stay fixed during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitParams {
    /// Lateral distance between the hip joints, meters.
    pub w_hip: f64,
    /// Largest accepted |stride modulation|.
    pub mod_max: f64,
    pub phases: PhaseTable,
    pub profile: ThighProfile,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            w_hip: 0.30,
            mod_max: 0.3,
            phases: PhaseTable::default(),
            profile: ThighProfile::default(),
        }
    }
}

/// The kinematic walker.
#[derive(Debug, Clone, Default)]
pub struct GaitModel {
    pub params: GaitParams,
}

impl GaitModel {
    pub fn new(params: GaitParams) -> Result<Self, GaitError> {
        if !(params.w_hip > 0.0) {
            return Err(GaitError::InvalidParameter("w_hip must be positive"));
        }
        if !(params.mod_max >= 0.0 && params.mod_max < 1.0) {
            return Err(GaitError::InvalidParameter("mod_max must lie in [0, 1)"));
        }
        Ok(Self { params })
    }

    /// Pivot angle for stride scaling: the profile value where swing opens,
    /// so changing the modulation at swing onset leaves the angle continuous.
    fn pivot(&self) -> f64 {
        self.params.profile.angle(self.params.phases.swing_onset())
    }

    pub fn thigh_angle(&self, phase_fraction: f64, modulation: f64) -> f64 {
        let c = self.pivot();
        c + (1.0 + modulation) * (self.params.profile.angle(phase_fraction) - c)
    }

    fn leg_at(&self, phase_fraction: f64, base_stride: f64) -> LegState {
        LegState {
            phase_fraction,
            thigh_angle: self.thigh_angle(phase_fraction, 0.0),
            stride_length: base_stride,
            phase: self.params.phases.phase_at(phase_fraction),
            modulation: 0.0,
        }
    }

    /// Walker at `position`/`heading` with the left leg at `left_fraction`
    /// and the right leg half a cycle later.
    pub fn initial_state(
        &self,
        position: Vec2,
        heading: f64,
        base_stride: f64,
        cadence: f64,
        left_fraction: f64,
    ) -> PedestrianState {
        let lf = left_fraction.rem_euclid(1.0);
        let rf = (lf + 0.5).rem_euclid(1.0);
        PedestrianState {
            position,
            heading: wrap_angle(heading),
            left: self.leg_at(lf, base_stride),
            right: self.leg_at(rf, base_stride),
            cadence,
            base_stride,
        }
    }

    fn in_swing(&self, leg: &LegState) -> bool {
        leg.phase_fraction >= self.params.phases.swing_onset()
    }

    /// Advances the walker by `dt` seconds.
    ///
    /// A leg accepts its modulation command only while it is swinging; the
    /// accepted value shapes the rest of that swing, fixes the stride
    /// committed at the following heel strike and stays in force until the
    /// leg's next swing opens. Commands for a leg in stance are ignored.
    pub fn advance(
        &self,
        state: &PedestrianState,
        dt: f64,
        mod_left: f64,
        mod_right: f64,
    ) -> Result<(PedestrianState, Vec<StepEvent>), GaitError> {
        if !(dt > 0.0) {
            return Err(GaitError::NonPositiveStep(dt));
        }
        for m in [mod_left, mod_right] {
            if !(m.abs() <= self.params.mod_max + 1e-12) {
                return Err(GaitError::ModulationOutOfRange {
                    value: m,
                    limit: self.params.mod_max,
                });
            }
        }
        let mut s = *state;
        for (leg, m) in [(Leg::Left, mod_left), (Leg::Right, mod_right)] {
            if self.in_swing(s.leg(leg)) {
                s.leg_mut(leg).modulation = m;
            }
        }

        let rate = 0.5 * s.cadence;
        let onset = self.params.phases.swing_onset();
        let mut events = Vec::new();
        let mut elapsed = 0.0;
        loop {
            let remaining = dt - elapsed;
            // Next boundary: a heel strike (fraction reaches 1) or a swing
            // opening (fraction reaches the onset).
            let mut next: Option<(f64, Leg, bool)> = None;
            for leg in [Leg::Left, Leg::Right] {
                let f = s.leg(leg).phase_fraction;
                let (target, strike) = if f < onset { (onset, false) } else { (1.0, true) };
                let t = (target - f) / rate;
                if t <= remaining && next.map_or(true, |(bt, _, _)| t < bt) {
                    next = Some((t, leg, strike));
                }
            }
            let Some((t, leg, strike)) = next else {
                self.coast(&mut s, remaining, rate);
                break;
            };
            self.coast(&mut s, t, rate);
            elapsed += t;
            if strike {
                let base = s.base_stride;
                let l = s.leg_mut(leg);
                l.phase_fraction = 0.0;
                l.stride_length = base * (1.0 + l.modulation);
                let stride = l.stride_length;
                let dpsi = (s.right.stride_length - s.left.stride_length) / self.params.w_hip;
                s.heading = wrap_angle(s.heading + dpsi);
                events.push(StepEvent {
                    leg,
                    offset: elapsed,
                    stride,
                    heading_change: dpsi,
                });
            } else {
                let l = s.leg_mut(leg);
                l.phase_fraction = onset;
                l.modulation = 0.0;
            }
            self.refresh(&mut s);
        }
        self.refresh(&mut s);
        Ok((s, events))
    }

    fn coast(&self, s: &mut PedestrianState, t: f64, rate: f64) {
        if t <= 0.0 {
            return;
        }
        let v = s.speed();
        s.position = s.position + Vec2::from_angle(s.heading) * (v * t);
        for leg in [&mut s.left, &mut s.right] {
            leg.phase_fraction += rate * t;
            if leg.phase_fraction >= 1.0 {
                leg.phase_fraction -= 1.0;
            }
        }
    }

    fn refresh(&self, s: &mut PedestrianState) {
        for leg in [&mut s.left, &mut s.right] {
            leg.phase = self.params.phases.phase_at(leg.phase_fraction);
            leg.thigh_angle = self.thigh_angle(leg.phase_fraction, leg.modulation);
        }
    }
}

/// One encoder observation of both ropes. Noise is keyed by `(seed, tick)`.
pub fn emit_rope_sample(
    state: &PedestrianState,
    geom: &RopeGeometry,
    t: f64,
    tick: u64,
    noise_sigma: f64,
    seed: u64,
) -> RopeSample {
    let mut rng = stream_rng(seed, Stream::Rope, tick);
    let left = rope_length(state.left.thigh_angle, geom) + gaussian(&mut rng, noise_sigma);
    let right = rope_length(state.right.thigh_angle, geom) + gaussian(&mut rng, noise_sigma);
    RopeSample {
        t,
        left_len: left.max(1e-6),
        right_len: right.max(1e-6),
    }
}
