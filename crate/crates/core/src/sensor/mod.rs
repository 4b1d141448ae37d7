//! Rolling multi-beam LiDAR simulated against a triangle scene.
//!
//! A scan action rolls the sensor about the robot's forward axis through a set
//! of discrete frames. Each frame fires every beam at every azimuth step; the
//! union of all hits, expressed in the map frame, is one sweep.

mod filter;
mod mesh;

use nalgebra::{Point3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use filter::{downsample_filter, statistical_outlier_mask, voxel_downsample, FilterParams};
pub use mesh::{intersect_triangle, ray_mesh_intersect, RayHit, SceneMesh};

use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarModel {
    pub n_beams: usize,
    /// Half-angle of the vertical field of view, degrees.
    pub vertical_fov: f64,
    /// Azimuth increment, degrees.
    pub horizontal_step: f64,
    pub max_range: f64,
    /// Standard deviation of the range noise; zero disables noise.
    pub noise_sigma: f64,
    /// Height of the sensor above the robot position.
    pub mount_height: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            n_beams: 16,
            vertical_fov: 15.0,
            horizontal_step: 1.0,
            max_range: 50.0,
            noise_sigma: 0.01,
            mount_height: 0.70,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_beams < 1 {
            return Err(Error::invalid("n_beams", "need at least one beam"));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 90.0) {
            return Err(Error::invalid("vertical_fov", "must be in (0, 90) degrees"));
        }
        if !(self.horizontal_step > 0.0 && self.horizontal_step <= 360.0) {
            return Err(Error::invalid("horizontal_step", "must be in (0, 360] degrees"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::invalid("max_range", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// Beam elevations in radians, evenly spread over `±vertical_fov`.
    pub fn beam_elevations(&self) -> Vec<f64> {
        if self.n_beams == 1 {
            return vec![0.0];
        }
        let fov = self.vertical_fov.to_radians();
        (0..self.n_beams)
            .map(|i| -fov + 2.0 * fov * i as f64 / (self.n_beams - 1) as f64)
            .collect()
    }

    pub fn azimuths(&self) -> Vec<f64> {
        let n = ((360.0 / self.horizontal_step).round() as usize).max(1);
        (0..n).map(|i| (i as f64 * self.horizontal_step).to_radians()).collect()
    }

    pub fn sensor_origin(&self, pose: &Pose) -> Point3<f64> {
        pose.position + Vector3::new(0.0, 0.0, self.mount_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanActionModel {
    pub roll_start: f64,
    pub roll_end: f64,
    pub roll_steps: usize,
}

impl Default for ScanActionModel {
    fn default() -> Self {
        Self {
            roll_start: 40.0,
            roll_end: -40.0,
            roll_steps: 9,
        }
    }
}

impl ScanActionModel {
    /// Single frame at zero roll.
    pub fn disabled() -> Self {
        Self {
            roll_start: 0.0,
            roll_end: 0.0,
            roll_steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roll_steps < 1 {
            return Err(Error::invalid("roll_steps", "need at least one frame"));
        }
        Ok(())
    }

    /// Roll angle of each frame in radians.
    pub fn frame_rolls(&self) -> Vec<f64> {
        if self.roll_steps == 1 {
            return vec![self.roll_start.to_radians()];
        }
        (0..self.roll_steps)
            .map(|i| {
                let f = i as f64 / (self.roll_steps - 1) as f64;
                (self.roll_start + f * (self.roll_end - self.roll_start)).to_radians()
            })
            .collect()
    }

    /// Effective vertical half field of view, degrees.
    pub fn effective_vertical_fov(&self, lidar: &LidarModel) -> f64 {
        lidar.vertical_fov + self.roll_start.abs().max(self.roll_end.abs())
    }
}

/// Accumulated cloud of one scan action, in the map frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<Point3<f64>>,
    pub sensor_origin: Point3<f64>,
    pub robot_pose: Pose,
}

fn frame_seed(seed: u64, frame: usize) -> u64 {
    // splitmix64 finalizer over (seed, frame)
    let mut z = seed ^ (frame as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates one scan action from `pose`. Range noise is Gaussian truncated at
/// three standard deviations; each frame draws from its own seeded stream so the
/// result does not depend on thread scheduling.
pub fn simulate_scan(
    scene: &SceneMesh,
    pose: &Pose,
    lidar: &LidarModel,
    action: &ScanActionModel,
    rng_seed: u64,
) -> Result<Sweep> {
    lidar.validate()?;
    action.validate()?;
    let sensor_origin = lidar.sensor_origin(pose);
    if scene.is_empty() {
        log::warn!("simulate_scan: empty scene, returning an empty sweep");
        return Ok(Sweep {
            points: Vec::new(),
            sensor_origin,
            robot_pose: *pose,
        });
    }
    let elevations = lidar.beam_elevations();
    let azimuths = lidar.azimuths();
    let rolls = action.frame_rolls();
    let sigma = lidar.noise_sigma;
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));

    let frames: Vec<Vec<Point3<f64>>> = rolls
        .par_iter()
        .enumerate()
        .map(|(f, &roll)| {
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(rng_seed, f));
            let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), pose.yaw)
                * Rotation3::from_axis_angle(&Vector3::x_axis(), roll);
            let mut pts = Vec::new();
            for &az in &azimuths {
                for &el in &elevations {
                    let local = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                    let dir = rot * local;
                    if let Some(hit) = scene.intersect(&sensor_origin, &dir, lidar.max_range) {
                        let mut range = hit.distance;
                        if let Some(n) = &noise {
                            range += n.sample(&mut rng).clamp(-3.0 * sigma, 3.0 * sigma);
                        }
                        pts.push(sensor_origin + dir * range);
                    }
                }
            }
            pts
        })
        .collect();
    Ok(Sweep {
        points: frames.concat(),
        sensor_origin,
        robot_pose: *pose,
    })
}
