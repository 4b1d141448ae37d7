//! Position cost, traversal cost, and the combined candidate utility.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Aabb, Pose};
use crate::terrain::TraversabilityMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionCostParams {
    pub d_thres: f64,
}

impl Default for PositionCostParams {
    fn default() -> Self {
        Self { d_thres: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraversalCostParams {
    pub behind_penalty: f64,
    /// Bearing (radians, relative to the robot heading) beyond which a candidate
    /// counts as behind the robot.
    pub behind_angle: f64,
}

impl Default for TraversalCostParams {
    fn default() -> Self {
        Self {
            behind_penalty: 0.5,
            behind_angle: FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    pub position: PositionCostParams,
    pub traversal: TraversalCostParams,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.position.d_thres > 0.0) {
            return Err(Error::invalid("d_thres", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.traversal.behind_penalty) {
            return Err(Error::invalid("behind_penalty", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Scan poses executed so far in the episode. Append-only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisitedRegistry {
    poses: Vec<Pose>,
}

impl VisitedRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pose: Pose) {
        self.poses.push(pose);
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// A candidate pose with its utility terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanCandidate {
    /// Index of the node in the candidate tree.
    pub node: usize,
    pub pose: Pose,
    /// Path length from the tree root, used to break utility ties.
    pub path_distance: f64,
    pub g: f64,
    pub p_cost: f64,
    pub t_cost: f64,
    pub utility: f64,
}

impl ScanCandidate {
    pub fn new(node: usize, pose: Pose, path_distance: f64, g: f64, p_cost: f64, t_cost: f64) -> Self {
        Self {
            node,
            pose,
            path_distance,
            g,
            p_cost,
            t_cost,
            utility: utility(g, p_cost, t_cost),
        }
    }
}

/// Distance from the candidate to the nearest visited pose (horizontal) or to
/// the object box surface, whichever is smaller.
pub fn nearest_obstacle_distance(candidate: &Pose, visited: &VisitedRegistry, object_bbox: &Aabb) -> f64 {
    visited
        .poses()
        .iter()
        .map(|v| v.horizontal_distance(candidate))
        .fold(object_bbox.distance_to(&candidate.position), f64::min)
}

pub fn position_cost(
    candidate: &Pose,
    visited: &VisitedRegistry,
    object_bbox: &Aabb,
    params: &PositionCostParams,
) -> f64 {
    let d = nearest_obstacle_distance(candidate, visited, object_bbox);
    position_cost_from_distance(d, params.d_thres)
}

pub fn position_cost_from_distance(d_c: f64, d_thres: f64) -> f64 {
    if (0.0..=d_thres).contains(&d_c) {
        1.0 - d_c / d_thres
    } else {
        0.0
    }
}

/// Binary terrain cost plus a constant penalty for candidates behind the robot.
pub fn traversal_cost(
    candidate: &Pose,
    robot: &Pose,
    traversability: &TraversabilityMap,
    params: &TraversalCostParams,
) -> f64 {
    match traversability.safe_at(candidate.x(), candidate.y()) {
        None => {
            log::debug!("traversal_cost: candidate on an unknown cell, treated as unsafe");
            return 1.0;
        }
        Some(false) => return 1.0,
        Some(true) => {}
    }
    let dx = candidate.x() - robot.x();
    let dy = candidate.y() - robot.y();
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let bearing = normalize_angle(dy.atan2(dx) - robot.yaw).abs();
    if bearing > params.behind_angle {
        params.behind_penalty
    } else {
        0.0
    }
}

pub fn utility(g: f64, p_cost: f64, t_cost: f64) -> f64 {
    g * (1.0 - p_cost) * (1.0 - t_cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{build_elevation_map, compute_traversability};
    use nalgebra::Point3;

    #[test]
    fn position_cost_shape() {
        assert_eq!(position_cost_from_distance(0.0, 2.0), 1.0);
        assert_eq!(position_cost_from_distance(2.0, 2.0), 0.0);
        assert_eq!(position_cost_from_distance(1.0, 2.0), 0.5);
        assert_eq!(position_cost_from_distance(3.0, 2.0), 0.0);
    }

    #[test]
    fn position_cost_uses_nearest_of_visited_and_object() {
        let bbox = Aabb::new(Point3::new(10.0, -1.0, 0.0), Point3::new(12.0, 1.0, 2.0));
        let mut visited = VisitedRegistry::new();
        let c = Pose::new(0.0, 0.0, 0.0, 0.0);
        let p = PositionCostParams::default();
        assert_eq!(position_cost(&c, &visited, &bbox, &p), 0.0);
        visited.push(Pose::new(1.0, 0.0, 5.0, 0.0));
        assert_eq!(position_cost(&c, &visited, &bbox, &p), 0.5);
        let at_object = Pose::new(9.0, 0.0, 0.0, 0.0);
        assert_eq!(position_cost(&at_object, &VisitedRegistry::new(), &bbox, &p), 0.5);
    }

    #[test]
    fn utility_products() {
        assert_eq!(utility(2.0, 0.25, 0.0), 1.5);
        assert_eq!(utility(7.3, 0.1, 1.0), 0.0);
        assert_eq!(utility(0.0, 0.3, 0.2), 0.0);
    }

    fn flat_map() -> TraversabilityMap {
        let mut pts = Vec::new();
        for i in -60..60 {
            for j in -60..60 {
                pts.push(Point3::new(i as f64 * 0.05 + 0.025, j as f64 * 0.05 + 0.025, 0.0));
            }
        }
        let elev = build_elevation_map(&pts, &Pose::new(0.0, 0.0, 0.0, 0.0), 4.0, 0.1);
        compute_traversability(&elev, 20f64.to_radians(), 0.15)
    }

    #[test]
    fn traversal_cost_cases() {
        let map = flat_map();
        let robot = Pose::new(0.0, 0.0, 0.0, 0.0);
        let p = TraversalCostParams::default();
        assert_eq!(traversal_cost(&Pose::new(1.0, 0.0, 0.0, 0.0), &robot, &map, &p), 0.0);
        assert_eq!(traversal_cost(&Pose::new(-1.0, 0.0, 0.0, 0.0), &robot, &map, &p), 0.5);
        assert_eq!(traversal_cost(&Pose::new(0.0, 1.0, 0.0, 0.0), &robot, &map, &p), 0.0);
        // outside the map: unknown
        assert_eq!(traversal_cost(&Pose::new(30.0, 0.0, 0.0, 0.0), &robot, &map, &p), 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(CostParams::default().validate().is_ok());
        let mut c = CostParams::default();
        c.traversal.behind_penalty = 1.0;
        assert!(c.validate().is_err());
        let mut c = CostParams::default();
        c.position.d_thres = 0.0;
        assert!(c.validate().is_err());
    }
}
