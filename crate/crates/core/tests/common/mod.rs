//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use nbv_core::occupancy::{OccupancyOctree, VoxelKey};
use nbv_core::{Aabb, ViKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Voxels crossed by the segment `origin + t·dir`, `t ∈ (0, t_max)`, excluding the
/// origin voxel and stopping at the grid edge. Collects every axis-plane
/// crossing, sorts them, and classifies the midpoint of each interval.
pub fn oracle_voxels(
    origin: Point3<f64>,
    dir: Vector3<f64>,
    t_max: f64,
    grid_min: Point3<f64>,
    res: f64,
    dims: [i32; 3],
) -> Vec<VoxelKey> {
    let mut ts = vec![0.0];
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            continue;
        }
        for plane in 0..=dims[a] {
            let x = grid_min[a] + plane as f64 * res;
            let t = (x - origin[a]) / dir[a];
            if t > 0.0 && t < t_max {
                ts.push(t);
            }
        }
    }
    ts.push(t_max);
    ts.sort_by(f64::total_cmp);
    let mut out: Vec<VoxelKey> = Vec::new();
    for w in ts.windows(2) {
        if w[1] - w[0] < 1e-12 {
            continue;
        }
        let p = origin + dir * (0.5 * (w[0] + w[1]));
        let idx = |a: usize| ((p[a] - grid_min[a]) / res).floor() as i32;
        let key = VoxelKey {
            i: idx(0),
            j: idx(1),
            k: idx(2),
        };
        if key.i < 0 || key.j < 0 || key.k < 0 || key.i >= dims[0] || key.j >= dims[1] || key.k >= dims[2] {
            break;
        }
        if out.last() != Some(&key) {
            out.push(key);
        }
    }
    if !out.is_empty() {
        out.remove(0);
    }
    out
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    h(p) + h(1.0 - p)
}

fn voxel_centre(map: &OccupancyOctree, k: &VoxelKey) -> Point3<f64> {
    let r = map.resolution();
    let o = map.origin();
    Point3::new(
        o.x + (k.i as f64 + 0.5) * r,
        o.y + (k.j as f64 + 0.5) * r,
        o.z + (k.k as f64 + 0.5) * r,
    )
}

/// Brute-force gain: per ray, the voxel list from the plane-crossing traversal,
/// cut after the first voxel above `occupied`, then Σ Π(1 - p_i) · H(p_n).
#[allow(clippy::too_many_arguments)]
pub fn ig_oracle(
    map: &OccupancyOctree,
    origin: Point3<f64>,
    directions: &[Vector3<f64>],
    max_range: f64,
    kind: ViKind,
    bbox: &Aabb,
    occupied: f64,
    free: f64,
) -> f64 {
    let occ = |k: &VoxelKey| map.probability(k) > occupied;
    let mut total = 0.0;
    for d in directions {
        let mut voxels = oracle_voxels(origin, *d, max_range, map.origin(), map.resolution(), map.dims());
        if let Some(i) = voxels.iter().position(occ) {
            voxels.truncate(i + 1);
        }
        let probs: Vec<f64> = voxels.iter().map(|k| map.probability(k)).collect();
        for n in 0..voxels.len() {
            let visibility: f64 = probs[..n].iter().map(|p| 1.0 - p).product();
            let vi = visibility * entropy(probs[n]);
            let counted = match kind {
                ViKind::OcclusionAware => true,
                ViKind::RearSideEntropy => {
                    let k = voxels[n];
                    let c = voxel_centre(map, &k);
                    let inside = (0..3).all(|a| c[a] >= bbox.min[a] && c[a] <= bbox.max[a]);
                    let unknown = probs[n] >= free && probs[n] <= occupied;
                    let behind_surface = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
                        .iter()
                        .any(|(a, b, c)| {
                            occ(&VoxelKey {
                                i: k.i + a,
                                j: k.j + b,
                                k: k.k + c,
                            })
                        });
                    inside && unknown && behind_surface
                }
            };
            if counted {
                total += vi;
            }
        }
    }
    total
}

/// Coverage by exhaustive nearest-neighbour search.
pub fn coverage_oracle(gt: &[Point3<f64>], cloud: &[Point3<f64>], threshold: f64) -> f64 {
    let covered = gt
        .iter()
        .filter(|g| cloud.iter().any(|c| (*g - c).norm() <= threshold))
        .count();
    covered as f64 / gt.len() as f64
}
