//! On-device gait recognizer and pedometer.
//!
//! Each rope channel is normalised against its rolling excursion over the
//! last few seconds: `n = (L_ext − L) / (L_ext − L_flex)`, where `L_ext` is
//! the rolling maximum (thigh extended, the stance baseline) and `L_flex` the
//! rolling minimum. A leg enters swing when `n` climbs past `h_hi`, and may
//! only do so again after `n` has dropped below `h_lo`. Heel strike sits in a
//! flat stretch of the thigh trajectory, so it is not thresholded directly:
//! the recognizer tracks the swing's peak flexion and predicts contact a
//! fixed cycle fraction later, using its running cycle-period estimate. If
//! the signal falls back below `h_lo` before the prediction fires, contact is
//! declared there instead.

use std::collections::VecDeque;
use std::io::BufRead;

use thiserror::Error;

use crate::gait_model::{thigh_angle_from_rope, CoarsePhase, Leg, RopeGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitSenseError {
    #[error("sample time {t} does not advance past {last}")]
    NonMonotonicTime { t: f64, last: f64 },
    #[error("stride estimator is not calibrated")]
    NotCalibrated,
    #[error("malformed rope stream at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error reading rope stream: {0}")]
    Io(String),
}

/// One encoder reading of both traction ropes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RopeSample {
    pub t: f64,
    pub left_len: f64,
    pub right_len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegEstimate {
    pub phase: CoarsePhase,
    pub last_step_time: Option<f64>,
    /// Time the current swing was detected, while swinging.
    pub swing_since: Option<f64>,
    /// Predicted heel-strike time, while swinging.
    pub contact_hat: Option<f64>,
    pub step_count: u64,
    /// A step event fired on this sample.
    pub stepped: bool,
}

impl Default for LegEstimate {
    fn default() -> Self {
        Self {
            phase: CoarsePhase::Stance,
            last_step_time: None,
            swing_since: None,
            contact_hat: None,
            step_count: 0,
            stepped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaitEstimate {
    /// Time of the sample this estimate follows.
    pub t: f64,
    pub left: LegEstimate,
    pub right: LegEstimate,
    /// Steps per second; zero until two step events have been seen.
    pub cadence_hat: f64,
    /// Meters per step.
    pub stride_hat: f64,
    pub step_count: u64,
}

impl GaitEstimate {
    pub fn leg(&self, leg: Leg) -> &LegEstimate {
        match leg {
            Leg::Left => &self.left,
            Leg::Right => &self.right,
        }
    }

    pub fn leg_mut(&mut self, leg: Leg) -> &mut LegEstimate {
        match leg {
            Leg::Left => &mut self.left,
            Leg::Right => &mut self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerConfig {
    /// Swing entry level, fraction of the rolling excursion.
    pub h_hi: f64,
    /// Re-arm level, fraction of the rolling excursion.
    pub h_lo: f64,
    /// Rolling window length, seconds.
    pub window: f64,
    /// Excursions smaller than this (meters) are treated as standing.
    pub min_excursion: f64,
    /// Cadence assumed before the first measured cycle, steps/s.
    pub cadence_prior: f64,
    /// Cycle fraction from peak flexion to heel strike.
    pub peak_to_contact: f64,
    /// Weight of the newest interval in the exponential averages.
    pub alpha: f64,
    /// Stride reported before calibration.
    pub default_stride: f64,
    /// Fail instead of falling back to `default_stride`.
    pub strict: bool,
    pub geometry: RopeGeometry,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            h_hi: 0.30,
            h_lo: 0.15,
            window: 3.0,
            min_excursion: 0.02,
            cadence_prior: 0.8 / 0.45,
            peak_to_contact: 0.25,
            alpha: 0.3,
            default_stride: 0.45,
            strict: false,
            geometry: RopeGeometry::default(),
        }
    }
}

/// Monotone-deque rolling min/max over a time window.
#[derive(Debug, Clone, Default)]
struct RollingExtrema {
    max_q: VecDeque<(f64, f64)>,
    min_q: VecDeque<(f64, f64)>,
}

impl RollingExtrema {
    fn push(&mut self, t: f64, v: f64, window: f64) {
        while self.max_q.back().is_some_and(|&(_, b)| b <= v) {
            self.max_q.pop_back();
        }
        self.max_q.push_back((t, v));
        while self.min_q.back().is_some_and(|&(_, b)| b >= v) {
            self.min_q.pop_back();
        }
        self.min_q.push_back((t, v));
        let cutoff = t - window;
        while self.max_q.front().is_some_and(|&(ft, _)| ft < cutoff) {
            self.max_q.pop_front();
        }
        while self.min_q.front().is_some_and(|&(ft, _)| ft < cutoff) {
            self.min_q.pop_front();
        }
    }

    fn max(&self) -> f64 {
        self.max_q.front().map_or(f64::NAN, |p| p.1)
    }

    fn min(&self) -> f64 {
        self.min_q.front().map_or(f64::NAN, |p| p.1)
    }
}

#[derive(Debug, Clone, Default)]
struct LegTracker {
    extrema: RollingExtrema,
    swinging: bool,
    armed: bool,
    swing_since: f64,
    /// (time, length) of the deepest flexion in the current swing; the time
    /// is refined by a parabola through the neighbouring samples.
    peak: (f64, f64),
    /// Sample preceding the peak sample, and whether the peak is the latest sample.
    peak_prev: f64,
    peak_is_last: bool,
    last_len: f64,
    last_peak_t: Option<f64>,
    cycle_hat: Option<f64>,
    /// Longest rope length seen in the current stance.
    stance_ext: f64,
    /// (extension, flexion) rope lengths of the latest completed step.
    excursion: Option<(f64, f64)>,
    out: LegEstimate,
}

impl LegTracker {
    fn new() -> Self {
        Self {
            armed: true,
            stance_ext: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    fn contact_hat(&self, cycle: f64, peak_to_contact: f64) -> f64 {
        self.peak.0 + peak_to_contact * cycle
    }

    /// Returns true when a step event fires on this sample.
    fn update(&mut self, t: f64, len: f64, dt: f64, cycle: f64, cfg: &RecognizerConfig) -> bool {
        self.extrema.push(t, len, cfg.window);
        let prev_len = std::mem::replace(&mut self.last_len, len);
        self.out.stepped = false;
        let ext = self.extrema.max();
        let flex = self.extrema.min();
        let p2p = ext - flex;
        let n = if p2p >= cfg.min_excursion { (ext - len) / p2p } else { 0.0 };

        if !self.swinging {
            self.stance_ext = self.stance_ext.max(len);
            if n < cfg.h_lo {
                self.armed = true;
            }
            if self.armed && p2p >= cfg.min_excursion && n > cfg.h_hi {
                self.swinging = true;
                self.armed = false;
                self.swing_since = t;
                self.peak = (t, len);
                self.peak_prev = prev_len;
                self.peak_is_last = true;
                self.out.phase = CoarsePhase::Swing;
                self.out.swing_since = Some(t);
                self.out.contact_hat = Some(self.contact_hat(cycle, cfg.peak_to_contact));
            }
            return false;
        }

        if len < self.peak.1 {
            self.peak = (t, len);
            self.peak_prev = prev_len;
            self.peak_is_last = true;
        } else if self.peak_is_last {
            self.peak_is_last = false;
            let (y0, y1, y2) = (self.peak_prev, self.peak.1, len);
            let curvature = y0 - 2.0 * y1 + y2;
            if curvature > 0.0 && y0.is_finite() {
                let delta = (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5);
                self.peak.0 += delta * dt;
            }
        }
        let contact = self.contact_hat(cycle, cfg.peak_to_contact);
        self.out.contact_hat = Some(contact);
        let predicted = t + 0.5 * dt >= contact;
        let fell_back = n < cfg.h_lo;
        if !(predicted || fell_back) {
            return false;
        }

        self.swinging = false;
        if let Some(prev) = self.last_peak_t {
            let interval = self.peak.0 - prev;
            let accept = match self.cycle_hat {
                Some(c) => interval > 0.5 * c && interval < 1.5 * c,
                None => interval > 0.25 * cycle && interval < 4.0 * cycle,
            };
            if accept {
                self.cycle_hat = Some(match self.cycle_hat {
                    Some(c) => c + cfg.alpha * (interval - c),
                    None => interval,
                });
            }
        }
        self.last_peak_t = Some(self.peak.0);
        if self.stance_ext.is_finite() {
            self.excursion = Some((self.stance_ext, self.peak.1));
        }
        self.stance_ext = len;
        self.out.phase = CoarsePhase::Stance;
        self.out.swing_since = None;
        self.out.contact_hat = None;
        self.out.last_step_time = Some(t);
        self.out.step_count += 1;
        self.out.stepped = true;
        true
    }
}

/// Streaming stance/swing recognizer for both legs.
#[derive(Debug, Clone)]
pub struct Recognizer {
    cfg: RecognizerConfig,
    left: LegTracker,
    right: LegTracker,
    last_t: Option<f64>,
    dt_hat: f64,
    last_event_t: Option<f64>,
    step_interval_hat: Option<f64>,
    events: u64,
    calibration: Option<f64>,
}

impl Recognizer {
    pub fn new(cfg: RecognizerConfig) -> Self {
        Self {
            cfg,
            left: LegTracker::new(),
            right: LegTracker::new(),
            last_t: None,
            dt_hat: 0.01,
            last_event_t: None,
            step_interval_hat: None,
            events: 0,
            calibration: None,
        }
    }

    pub fn config(&self) -> &RecognizerConfig {
        &self.cfg
    }

    fn cycle_for(&self, leg: Leg) -> f64 {
        let (own, other) = match leg {
            Leg::Left => (&self.left, &self.right),
            Leg::Right => (&self.right, &self.left),
        };
        own.cycle_hat
            .or(other.cycle_hat)
            .unwrap_or(2.0 / self.cfg.cadence_prior)
    }

    /// Consumes one sample and returns the updated estimate.
    pub fn ingest(&mut self, sample: RopeSample) -> Result<GaitEstimate, GaitSenseError> {
        if let Some(last) = self.last_t {
            if !(sample.t > last) {
                return Err(GaitSenseError::NonMonotonicTime { t: sample.t, last });
            }
            self.dt_hat = sample.t - last;
        }
        self.last_t = Some(sample.t);
        let dt = self.dt_hat;
        let cycle_l = self.cycle_for(Leg::Left);
        let cycle_r = self.cycle_for(Leg::Right);
        let cfg = self.cfg.clone();
        let fired = [
            self.left.update(sample.t, sample.left_len, dt, cycle_l, &cfg),
            self.right.update(sample.t, sample.right_len, dt, cycle_r, &cfg),
        ];
        for f in fired {
            if f {
                self.register_step(sample.t);
            }
        }
        Ok(self.estimate(sample.t))
    }

    fn register_step(&mut self, t: f64) {
        if let Some(prev) = self.last_event_t {
            let interval = t - prev;
            if interval > 0.0 {
                self.step_interval_hat = Some(match self.step_interval_hat {
                    Some(h) => h + self.cfg.alpha * (interval - h),
                    None => interval,
                });
            }
        }
        self.last_event_t = Some(t);
        self.events += 1;
    }

    fn estimate(&self, t: f64) -> GaitEstimate {
        let cadence_hat = match (self.events >= 2, self.step_interval_hat) {
            (true, Some(h)) if h > 0.0 => 1.0 / h,
            _ => 0.0,
        };
        let stride_hat = self
            .estimate_stride(&self.cfg.geometry)
            .unwrap_or(self.cfg.default_stride);
        GaitEstimate {
            t,
            left: self.left.out,
            right: self.right.out,
            cadence_hat,
            stride_hat,
            step_count: self.events,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.events
    }

    /// Stride length implied by the latest completed step's thigh excursion,
    /// `calibration · 2·|l1|·sin(amplitude / 2)`.
    pub fn raw_stride(&self, geom: &RopeGeometry) -> Option<f64> {
        let latest = [&self.left, &self.right]
            .into_iter()
            .filter_map(|l| l.excursion.map(|e| (l.out.last_step_time.unwrap_or(0.0), e)))
            .max_by(|a, b| a.0.total_cmp(&b.0))?
            .1;
        let (ext_len, flex_len) = latest;
        let th_ext = thigh_angle_from_rope(ext_len, geom, -1.2, 1.2);
        let th_flex = thigh_angle_from_rope(flex_len, geom, -1.2, 1.2);
        let amplitude = (th_flex - th_ext).abs();
        Some(2.0 * geom.l1.norm() * (0.5 * amplitude).sin())
    }

    pub fn estimate_stride(&self, geom: &RopeGeometry) -> Result<f64, GaitSenseError> {
        match (self.calibration, self.raw_stride(geom)) {
            (Some(k), Some(raw)) => Ok(k * raw),
            _ if self.cfg.strict => Err(GaitSenseError::NotCalibrated),
            _ => Ok(self.cfg.default_stride),
        }
    }

    /// Fits the calibration constant so the latest step maps to
    /// `known_stride`. Returns the constant.
    pub fn calibrate(&mut self, geom: &RopeGeometry, known_stride: f64) -> Result<f64, GaitSenseError> {
        let raw = self.raw_stride(geom).ok_or(GaitSenseError::NotCalibrated)?;
        if !(raw > 0.0) {
            return Err(GaitSenseError::NotCalibrated);
        }
        let k = known_stride / raw;
        self.calibration = Some(k);
        Ok(k)
    }

    pub fn set_calibration(&mut self, k: f64) {
        self.calibration = Some(k);
    }

    pub fn calibration(&self) -> Option<f64> {
        self.calibration
    }
}

/// Reads a `t,left_len,right_len` CSV stream (header optional).
pub fn read_rope_csv<R: BufRead>(reader: R) -> Result<Vec<RopeSample>, GaitSenseError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GaitSenseError::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line.starts_with('t') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(GaitSenseError::Parse {
                line: i + 1,
                reason: format!("expected 3 columns, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| GaitSenseError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        };
        out.push(RopeSample {
            t: parse(fields[0])?,
            left_len: parse(fields[1])?,
            right_len: parse(fields[2])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_model::{emit_rope_sample, GaitModel};
    use crate::geom::Vec2;

    #[test]
    fn standing_stream_never_steps() {
        let mut r = Recognizer::new(RecognizerConfig::default());
        for i in 0..500 {
            let e = r
                .ingest(RopeSample { t: i as f64 * 0.01, left_len: 0.25, right_len: 0.25 })
                .unwrap();
            assert_eq!(e.step_count, 0);
            assert_eq!(e.left.phase, CoarsePhase::Stance);
            assert_eq!(e.right.phase, CoarsePhase::Stance);
            assert_eq!(e.cadence_hat, 0.0);
        }
    }

    #[test]
    fn rejects_time_going_backwards() {
        let mut r = Recognizer::new(RecognizerConfig::default());
        r.ingest(RopeSample { t: 1.0, left_len: 0.2, right_len: 0.2 }).unwrap();
        assert!(matches!(
            r.ingest(RopeSample { t: 1.0, left_len: 0.2, right_len: 0.2 }),
            Err(GaitSenseError::NonMonotonicTime { .. })
        ));
    }

    #[test]
    fn uncalibrated_stride_falls_back_or_fails() {
        let r = Recognizer::new(RecognizerConfig::default());
        assert_eq!(r.estimate_stride(&RopeGeometry::default()).unwrap(), 0.45);
        let strict = Recognizer::new(RecognizerConfig { strict: true, ..Default::default() });
        assert_eq!(
            strict.estimate_stride(&RopeGeometry::default()),
            Err(GaitSenseError::NotCalibrated)
        );
    }

    fn walk(m: &GaitModel, modulation: f64, seconds: f64) -> Recognizer {
        let geom = RopeGeometry::default();
        let mut s = m.initial_state(Vec2::ZERO, 0.0, 0.45, 0.8 / 0.45, 0.0);
        let mut r = Recognizer::new(RecognizerConfig::default());
        let n = (seconds * 100.0) as u64;
        for tick in 0..n {
            let t = tick as f64 * 0.01;
            r.ingest(emit_rope_sample(&s, &geom, t, tick, 0.0, 0)).unwrap();
            s = m.advance(&s, 0.01, modulation, modulation).unwrap().0;
        }
        r
    }

    #[test]
    fn stride_estimate_is_monotone_in_modulation() {
        let m = GaitModel::default();
        let geom = RopeGeometry::default();
        let mut plain = walk(&m, 0.0, 10.0);
        let k = plain.calibrate(&geom, 0.45).unwrap();
        let est = plain.estimate_stride(&geom).unwrap();
        assert!((est - 0.45).abs() < 0.01);
        let mut longer = walk(&m, 0.2, 10.0);
        longer.set_calibration(k);
        assert!(longer.estimate_stride(&geom).unwrap() > est);
    }

    #[test]
    fn parses_rope_csv() {
        let text = "t,left_len,right_len\n0.00,0.25,0.26\n0.01,0.25,0.26\n";
        let v = read_rope_csv(text.as_bytes()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].right_len, 0.26);
        assert!(read_rope_csv("0.0,1\n".as_bytes()).is_err());
    }
}
