//! Sweep post-processing: voxel-grid downsampling followed by statistical
//! outlier removal.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Sweep;
use crate::error::{Error, Result};
use crate::spatial::PointIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub leaf_size: f64,
    pub outlier_k: usize,
    pub outlier_stddev: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            leaf_size: 0.05,
            outlier_k: 10,
            outlier_stddev: 1.0,
        }
    }
}

/// One centroid per occupied leaf cell, in cell order.
pub fn voxel_downsample(points: &[Point3<f64>], leaf_size: f64) -> Result<Vec<Point3<f64>>> {
    if !(leaf_size > 0.0) {
        return Err(Error::invalid("leaf_size", "must be positive"));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vector3<f64>, usize)> = BTreeMap::new();
    for p in points {
        let key = (
            (p.x / leaf_size).floor() as i64,
            (p.y / leaf_size).floor() as i64,
            (p.z / leaf_size).floor() as i64,
        );
        let e = cells.entry(key).or_insert((Vector3::zeros(), 0));
        e.0 += p.coords;
        e.1 += 1;
    }
    Ok(cells
        .into_values()
        .map(|(sum, n)| Point3::from(sum / n as f64))
        .collect())
}

/// Keeps points whose mean distance to their `k` nearest neighbours is at most
/// `mean + stddev_factor * std` over the cloud. Returns `None` when the cloud has
/// fewer than `k + 1` points and the stage is skipped.
pub fn statistical_outlier_mask(points: &[Point3<f64>], k: usize, stddev_factor: f64) -> Option<Vec<bool>> {
    if k == 0 || points.len() < k + 1 {
        return None;
    }
    let index = PointIndex::new(points);
    let mean_dists: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let d = index.knn_distances(p, k + 1);
            // first entry is the point itself
            d[1..].iter().sum::<f64>() / k as f64
        })
        .collect();
    let n = mean_dists.len() as f64;
    let mean = mean_dists.iter().sum::<f64>() / n;
    let var = mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let limit = mean + stddev_factor * var.sqrt();
    Some(mean_dists.iter().map(|d| *d <= limit).collect())
}

pub fn downsample_filter(sweep: &Sweep, params: &FilterParams) -> Result<Sweep> {
    let points = voxel_downsample(&sweep.points, params.leaf_size)?;
    let points = match statistical_outlier_mask(&points, params.outlier_k, params.outlier_stddev) {
        Some(keep) => points
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect(),
        None => points,
    };
    Ok(Sweep {
        points,
        sensor_origin: sweep.sensor_origin,
        robot_pose: sweep.robot_pose,
    })
}
