//! Deterministic 2D simulation and control library for a wearable guidance
//! device that steers a walker through stride asymmetry.
//!
//! The crate is organised along the device's data flow:
//!
//! - [`gait_model`]: ground-truth walker kinematics, thigh-angle profile and
//!   the rope-length geometry observed by the motor encoders.
//! - [`gait_sense`]: the on-device stance/swing recognizer and pedometer.
//! - [`guidance`]: closed-loop heading regulation through stride modulation.
//! - [`world_sense`]: LIDAR, GPS and IMU simulation, occupancy mapping,
//!   scan-matching localization and dead reckoning.
//! - [`planner`]: A* on inflated grids, gap-based obstacle avoidance and
//!   waypoint following.
//! - [`harness`]: scenarios, the fixed-rate runner, baselines, metrics and
//!   artifact emission.

pub mod gait_model;
pub mod gait_sense;
pub mod geom;
pub mod guidance;
pub mod harness;
pub mod planner;
pub mod rng;
pub mod world_sense;

pub use geom::{wrap_angle, Pose, Vec2};
