//! Simulated sensor suite and the walker's belief state.

mod gps;
mod imu;
mod lidar;
mod localize;
mod nav;
mod occupancy;
mod world;

use thiserror::Error;

pub use gps::{simulate_gps, Gps};
pub use imu::{simulate_imu, Imu};
pub use lidar::{simulate_lidar, Lidar, LidarConfig, ScanFrame, MAX_RANGE, NO_RETURN};
pub use localize::{localize, LocalizeConfig};
pub use nav::{dead_reckon, fuse_gps, mode_switch, NavEstimate, NavMode, MODE_SWITCH_TICKS};
pub use occupancy::{update_occupancy, update_occupancy_within, OccupancyGrid, L_CLAMP, L_FREE, L_OCC};
pub use world::WorldModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("pose ({x:.3}, {y:.3}) lies outside the world bounds")]
    PoseOutOfBounds { x: f64, y: f64 },
    #[error("scan has {valid} valid beams, at least {needed} required")]
    DegenerateScan { valid: usize, needed: usize },
    #[error("invalid world: {0}")]
    InvalidWorld(String),
}
