//! Reconstruction quality and episode efficiency metrics.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::sensor::SceneMesh;
use crate::spatial::PointIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub c_p: f64,
    pub n_observed: usize,
    pub n_ground_truth: usize,
    pub threshold: f64,
}

/// Fraction of ground-truth points whose nearest accumulated point lies within
/// `threshold`.
pub fn point_cloud_coverage(
    ground_truth: &[Point3<f64>],
    accumulated: &[Point3<f64>],
    threshold: f64,
) -> Result<CoverageReport> {
    let index = PointIndex::new(accumulated);
    coverage_with_index(ground_truth, &index, threshold)
}

/// Same as [`point_cloud_coverage`] with a prebuilt index, so one index can serve
/// several ground-truth subsets.
pub fn coverage_with_index(ground_truth: &[Point3<f64>], index: &PointIndex, threshold: f64) -> Result<CoverageReport> {
    if ground_truth.is_empty() {
        return Err(Error::invalid("ground_truth", "cloud is empty"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::invalid("threshold", "must be non-negative"));
    }
    let n_observed = if index.is_empty() {
        0
    } else {
        ground_truth
            .par_iter()
            .filter(|p| index.nearest_distance(p).is_some_and(|d| d <= threshold))
            .count()
    };
    Ok(CoverageReport {
        c_p: n_observed as f64 / ground_truth.len() as f64,
        n_observed,
        n_ground_truth: ground_truth.len(),
        threshold,
    })
}

/// Sum of horizontal distances between consecutive poses.
pub fn travel_distance(poses: &[Pose]) -> f64 {
    poses.windows(2).map(|w| w[0].horizontal_distance(&w[1])).sum()
}

/// Distance from a voxel centre to one of its corners.
pub fn default_threshold(resolution: f64) -> f64 {
    0.75f64.sqrt() * resolution
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub d_t: f64,
    pub n_s: usize,
    /// Wall-clock time of the whole episode, seconds.
    pub t_all: f64,
    /// Mean time per scan spent on information gain, costs and selection, seconds.
    pub t_nbv: f64,
    /// Coverage of the full ground truth after each scan.
    pub coverage_per_step: Vec<f64>,
    /// Coverage of the ground truth observable from sensor height.
    pub observable_coverage_per_step: Vec<f64>,
    /// Coverage of the side faces (`|n_z| < 0.5`).
    pub side_coverage_per_step: Vec<f64>,
}

/// Surface samples with outward normals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn subset(&self, mask: &[bool]) -> Vec<Point3<f64>> {
        self.points
            .iter()
            .zip(mask)
            .filter_map(|(p, &m)| m.then_some(*p))
            .collect()
    }
}

/// Samples the object triangles of `scene` uniformly by area. Each triangle gets
/// `area / spacing²` points in expectation, with the fractional part resolved by
/// a coin flip.
pub fn sample_surface(scene: &SceneMesh, spacing: f64, rng_seed: u64) -> Result<GroundTruth> {
    if !(spacing > 0.0) {
        return Err(Error::invalid("spacing", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut gt = GroundTruth::default();
    let density = 1.0 / (spacing * spacing);
    for t in scene.object_triangles() {
        let area = scene.triangle_area(t);
        if area <= 0.0 {
            continue;
        }
        let expected = area * density;
        let mut count = expected.floor() as usize;
        if rng.random::<f64>() < expected.fract() {
            count += 1;
        }
        let [a, b, c] = scene.triangle(t);
        let normal = scene.triangle_normal(t);
        for _ in 0..count {
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            gt.points.push(a + (b - a) * u + (c - a) * v);
            gt.normals.push(normal);
        }
    }
    Ok(gt)
}

/// True for points a sensor at `sensor_height` could see face-on somewhere along
/// its elevation range `±max_elevation` (radians), ignoring occlusion.
///
/// Looking at a point above the sensor needs a positive elevation, below it a
/// negative one. The surface faces the sensor when
/// `|n_h| cos e - n_z sin e > 0`, which is maximised over the admissible range.
pub fn observable_mask(gt: &GroundTruth, sensor_height: f64, max_elevation: f64) -> Vec<bool> {
    gt.points
        .iter()
        .zip(&gt.normals)
        .map(|(p, n)| {
            let nh = n.x.hypot(n.y);
            let f = |e: f64| nh * e.cos() - n.z * e.sin();
            let dz = p.z - sensor_height;
            let (lo, hi) = if dz.abs() < 1e-9 {
                (0.0, 0.0)
            } else if dz > 0.0 {
                (0.0, max_elevation)
            } else {
                (-max_elevation, 0.0)
            };
            let stationary = (-n.z).atan2(nh);
            let mut best = f(lo).max(f(hi));
            if stationary > lo && stationary < hi {
                best = best.max(f(stationary));
            }
            best > 1e-9
        })
        .collect()
}

pub fn side_face_mask(gt: &GroundTruth) -> Vec<bool> {
    gt.normals.iter().map(|n| n.z.abs() < 0.5).collect()
}
