use crate::geom::Vec2;
use crate::rng::{gaussian, stream_rng, Stream};

use super::WorldModel;

/// Per-axis noise giving roughly 95% of fixes within 2 m.
pub const DEFAULT_SIGMA: f64 = 0.8;

/// A fix exists only inside one of the world's GPS regions.
pub fn simulate_gps(position: Vec2, world: &WorldModel, seed: u64, tick: u64, sigma: f64) -> Option<Vec2> {
    if !world.gps_available(position) {
        return None;
    }
    let mut rng = stream_rng(seed, Stream::Gps, tick);
    let dx = gaussian(&mut rng, sigma);
    let dy = gaussian(&mut rng, sigma);
    Some(position + Vec2::new(dx, dy))
}

#[derive(Debug, Clone)]
pub struct Gps {
    pub sigma: f64,
    pub seed: u64,
}

impl Gps {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed }
    }

    pub fn fix(&self, position: Vec2, world: &WorldModel, tick: u64) -> Option<Vec2> {
        simulate_gps(position, world, self.seed, tick, self.sigma)
    }
}

impl Default for Gps {
    fn default() -> Self {
        Self::new(DEFAULT_SIGMA, 0)
    }
}
