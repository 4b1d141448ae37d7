//! Next-best-view active mapping for a legged robot with a rolling LiDAR.
//!
//! The crate simulates the sensor against a triangle scene, fuses sweeps into a
//! log-odds occupancy map, scores RRT-sampled scan candidates by volumetric
//! information gain and motion costs, and drives the full scan, plan, move loop.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod info_gain;
pub mod io;
pub mod mission;
pub mod occupancy;
pub mod planner;
pub mod scenes;
pub mod sensor;
pub mod spatial;
pub mod terrain;

pub use error::{Error, Result};
pub use geometry::{Aabb, Pose};
pub use info_gain::ViKind;
pub use occupancy::{OccupancyOctree, OccupancyParams, OccupancyState, VoxelKey};
