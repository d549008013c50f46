use crate::geom::wrap_angle;
use crate::rng::{gaussian, stream_rng, Stream};

/// Heading sensor: truth plus a linearly drifting bias and white noise.
#[derive(Debug, Clone)]
pub struct Imu {
    /// White-noise standard deviation, radians.
    pub sigma: f64,
    /// Bias growth, radians per second.
    pub bias_drift: f64,
    pub seed: u64,
}

impl Imu {
    pub fn new(sigma_deg: f64, bias_drift_deg_per_s: f64, seed: u64) -> Self {
        Self {
            sigma: sigma_deg.to_radians(),
            bias_drift: bias_drift_deg_per_s.to_radians(),
            seed,
        }
    }

    pub fn read(&self, true_heading: f64, t: f64, tick: u64) -> f64 {
        let mut rng = stream_rng(self.seed, Stream::Imu, tick);
        wrap_angle(true_heading + self.bias_drift * t + gaussian(&mut rng, self.sigma))
    }
}

impl Default for Imu {
    fn default() -> Self {
        Self::new(1.0, 0.1, 0)
    }
}

/// One reading at time `t` (tick index `tick`).
pub fn simulate_imu(
    true_heading: f64,
    seed: u64,
    tick: u64,
    t: f64,
    sigma_deg: f64,
    bias_drift_deg_per_s: f64,
) -> f64 {
    Imu::new(sigma_deg, bias_drift_deg_per_s, seed).read(true_heading, t, tick)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_is_identity() {
        for &h in &[-3.0, -0.5, 0.0, 1.2, 3.1] {
            assert_eq!(simulate_imu(h, 1, 7, 4.0, 0.0, 0.0), wrap_angle(h));
        }
    }

    #[test]
    fn bias_only_after_ten_seconds() {
        let r = simulate_imu(0.0, 1, 1000, 10.0, 0.0, 0.1);
        assert!((r.to_degrees() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn white_noise_variance_matches() {
        let imu = Imu::new(1.0, 0.0, 5);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| imu.read(0.0, 0.0, i)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = 1f64.to_radians().powi(2);
        assert!((var / expected - 1.0).abs() < 0.10, "ratio {}", var / expected);
    }
}
