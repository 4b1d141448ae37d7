//! Volumetric information of voxels and per-candidate information gain.
//!
//! A candidate's gain is obtained by casting a fixed fan of rays from its sensor
//! origin through the occupancy map and summing a per-voxel information measure
//! over every traversed voxel. Two measures are available: entropy weighted by
//! visibility along the ray, and the same quantity restricted to unknown voxels
//! that sit directly behind observed surfaces of the object.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::occupancy::{OccupancyOctree, OccupancyState, VoxelKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViKind {
    #[serde(rename = "oa")]
    OcclusionAware,
    #[serde(rename = "rse")]
    RearSideEntropy,
}

impl ViKind {
    pub const ALL: [ViKind; 2] = [ViKind::OcclusionAware, ViKind::RearSideEntropy];

    pub fn as_str(&self) -> &'static str {
        match self {
            ViKind::OcclusionAware => "oa",
            ViKind::RearSideEntropy => "rse",
        }
    }
}

impl fmt::Display for ViKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oa" | "occlusion_aware" | "occlusion-aware" => Ok(ViKind::OcclusionAware),
            "rse" | "rear_side_entropy" | "rear-side-entropy" => Ok(ViKind::RearSideEntropy),
            other => Err(Error::parse(
                "vi kind",
                format!("unknown kind `{other}` (expected oa or rse)"),
            )),
        }
    }
}

/// Density and reach of the rays cast from a hypothetical scan pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgParams {
    /// Degrees between ray azimuths.
    pub azimuth_step: f64,
    /// Degrees between ray elevations.
    pub elevation_step: f64,
    /// Elevation half-range in degrees; matches the scan action's effective FoV.
    pub max_elevation: f64,
    pub max_range: f64,
}

impl Default for IgParams {
    fn default() -> Self {
        Self {
            azimuth_step: 10.0,
            elevation_step: 5.0,
            max_elevation: 55.0,
            max_range: 15.0,
        }
    }
}

impl IgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.azimuth_step > 0.0 && self.azimuth_step <= 360.0) {
            return Err(Error::invalid("azimuth_step", "must be in (0, 360]"));
        }
        if !(self.elevation_step > 0.0) {
            return Err(Error::invalid("elevation_step", "must be positive"));
        }
        if !(self.max_elevation >= 0.0 && self.max_elevation < 90.0) {
            return Err(Error::invalid("max_elevation", "must be in [0, 90)"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::invalid("max_range", "must be positive"));
        }
        Ok(())
    }
}

/// Rays cast by one scan candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRaySet {
    pub origin: Point3<f64>,
    pub directions: Vec<Vector3<f64>>,
}

impl CandidateRaySet {
    pub fn new(origin: Point3<f64>, params: &IgParams) -> Self {
        let n_az = ((360.0 / params.azimuth_step).round() as usize).max(1);
        let n_el = (2.0 * params.max_elevation / params.elevation_step + 1e-9).floor() as usize + 1;
        let mut directions = Vec::with_capacity(n_az * n_el);
        for a in 0..n_az {
            let az = (a as f64 * params.azimuth_step).to_radians();
            for e in 0..n_el {
                let el = (-params.max_elevation + e as f64 * params.elevation_step).to_radians();
                directions.push(Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        Self { origin, directions }
    }
}

/// Binary entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Probability that the `n`-th voxel of a ray is visible: the product of
/// `1 - P_o` over the voxels in front of it.
pub fn visibility_probability(ray: &[f64], n: usize) -> Result<f64> {
    if n >= ray.len() {
        return Err(Error::RayIndexOutOfRange {
            index: n,
            len: ray.len(),
        });
    }
    let mut pv = 1.0;
    for &p in &ray[..n] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        pv *= 1.0 - p;
    }
    Ok(pv)
}

pub fn occlusion_aware_vi(ray: &[f64], n: usize) -> Result<f64> {
    let pv = visibility_probability(ray, n)?;
    Ok(pv * entropy(ray[n])?)
}

/// Unknown voxel inside the object box with at least one face neighbour that is
/// occupied.
pub fn classify_rear_side(octree: &OccupancyOctree, key: &VoxelKey, object_bbox: &Aabb) -> bool {
    object_bbox.contains(&octree.center_of(key))
        && octree.state(key) == OccupancyState::Unknown
        && key.face_neighbors().iter().any(|nb| octree.is_occupied(nb))
}

pub fn rear_side_entropy_vi(octree: &OccupancyOctree, ray: &[VoxelKey], n: usize, object_bbox: &Aabb) -> Result<f64> {
    if n >= ray.len() {
        return Err(Error::RayIndexOutOfRange {
            index: n,
            len: ray.len(),
        });
    }
    let probs: Vec<f64> = ray[..=n].iter().map(|k| octree.probability(k)).collect();
    let oa = occlusion_aware_vi(&probs, n)?;
    Ok(if classify_rear_side(octree, &ray[n], object_bbox) {
        oa
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub gain: f64,
    pub rays: usize,
    pub voxels: usize,
    /// False when the sensor origin lay outside the map; the gain is then zero.
    pub origin_in_bounds: bool,
}

/// Sums the chosen information measure over every voxel traversed by every ray
/// of the candidate. Rays stop at (and include) the first occupied voxel, at the
/// map boundary, or at `max_range`; the map bounds are the inflated object box,
/// which confines the sum to it.
pub fn information_gain(
    octree: &OccupancyOctree,
    sensor_origin: &Point3<f64>,
    params: &IgParams,
    kind: ViKind,
    object_bbox: &Aabb,
) -> GainEstimate {
    let rays = CandidateRaySet::new(*sensor_origin, params);
    gain_for_rays(octree, &rays, params.max_range, kind, object_bbox)
}

/// [`information_gain`] over an arbitrary ray set.
pub fn gain_for_rays(
    octree: &OccupancyOctree,
    rays: &CandidateRaySet,
    max_range: f64,
    kind: ViKind,
    object_bbox: &Aabb,
) -> GainEstimate {
    if octree.key_of(&rays.origin).is_none() {
        log::debug!("information_gain: origin {:?} outside the map, gain 0", rays.origin);
        return GainEstimate {
            gain: 0.0,
            rays: 0,
            voxels: 0,
            origin_in_bounds: false,
        };
    }
    let mut gain = 0.0;
    let mut voxels = 0;
    for dir in &rays.directions {
        let trav = octree.raycast(&rays.origin, dir, max_range);
        voxels += trav.voxels.len();
        let mut visibility = 1.0;
        let mut ray_sum = 0.0;
        for key in &trav.voxels {
            let p = octree.probability(key);
            let counted = match kind {
                ViKind::OcclusionAware => true,
                ViKind::RearSideEntropy => classify_rear_side(octree, key, object_bbox),
            };
            if counted {
                ray_sum += visibility * entropy(p).expect("probability from logistic");
            }
            visibility *= 1.0 - p;
        }
        gain += ray_sum;
    }
    GainEstimate {
        gain,
        rays: rays.directions.len(),
        voxels,
        origin_in_bounds: true,
    }
}
