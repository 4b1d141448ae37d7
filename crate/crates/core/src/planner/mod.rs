//! Two-phase planning over the traversability map.
//!
//! A goal-free RRT spreads scan candidates over the safe area around the robot;
//! after utilities are evaluated the best candidate is selected and an RRT*
//! replans a short route to it.

mod rrt;
mod rrt_star;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use rrt::{grow_rrt, RrtGrowth, RrtTree};
pub use rrt_star::{replan_rrt_star, RrtStarOutcome};

use crate::costs::ScanCandidate;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::terrain::{is_position_valid, TraversabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// Number of scan candidates grown per iteration (tree nodes besides the root).
    pub n_nodes: usize,
    /// Steering step, metres.
    pub step: f64,
    /// Spacing of validity samples along an edge, metres.
    pub edge_resolution: f64,
    pub goal_tolerance: f64,
    pub rrt_star_iterations: usize,
    /// Fraction of RRT* samples drawn at the goal.
    pub goal_bias: f64,
    /// Sample budget of the candidate tree, as a multiple of `n_nodes`.
    pub sample_budget_factor: usize,
    pub u_thres: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            n_nodes: 150,
            step: 0.5,
            edge_resolution: 0.1,
            goal_tolerance: 0.3,
            rrt_star_iterations: 2000,
            goal_bias: 0.1,
            sample_budget_factor: 100,
            u_thres: 0.03,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 1 {
            return Err(Error::invalid("n_nodes", "need at least one node"));
        }
        if !(self.step > 0.0) {
            return Err(Error::invalid("step", "must be positive"));
        }
        if !(self.edge_resolution > 0.0) {
            return Err(Error::invalid("edge_resolution", "must be positive"));
        }
        if !(self.goal_tolerance >= 0.0) {
            return Err(Error::invalid("goal_tolerance", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.goal_bias) {
            return Err(Error::invalid("goal_bias", "must be in [0, 1)"));
        }
        if self.sample_budget_factor < 1 {
            return Err(Error::invalid("sample_budget_factor", "must be at least 1"));
        }
        if self.u_thres.is_nan() {
            return Err(Error::invalid("u_thres", "must be a number"));
        }
        Ok(())
    }
}

/// Ordered waypoints from start to goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    pub waypoints: Vec<Pose>,
    pub length: f64,
}

impl PathPlan {
    pub fn from_waypoints(waypoints: Vec<Pose>) -> Self {
        let length = waypoints.windows(2).map(|w| w[0].horizontal_distance(&w[1])).sum();
        Self { waypoints, length }
    }
}

/// Validity of robot poses and straight edges on one traversability snapshot.
#[derive(Clone, Copy)]
pub struct ValidityChecker<'a> {
    pub map: &'a TraversabilityMap,
    pub footprint_radius: f64,
    pub edge_resolution: f64,
}

impl<'a> ValidityChecker<'a> {
    pub fn new(map: &'a TraversabilityMap, footprint_radius: f64, edge_resolution: f64) -> Self {
        Self {
            map,
            footprint_radius,
            edge_resolution,
        }
    }

    pub fn point_ok(&self, x: f64, y: f64) -> bool {
        is_position_valid(x, y, self.map, self.footprint_radius)
    }

    /// Samples the segment densely, endpoints included.
    pub fn edge_ok(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len / self.edge_resolution).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let f = i as f64 / n as f64;
            self.point_ok(a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))
        })
    }

    /// Pose at a map position; height from the elevation map, yaw given.
    pub fn pose_at(&self, x: f64, y: f64, yaw: f64, fallback_z: f64) -> Pose {
        Pose::new(x, y, self.map.height_at(x, y).unwrap_or(fallback_z), yaw)
    }
}

fn better(a: &ScanCandidate, b: &ScanCandidate) -> bool {
    match a.utility.total_cmp(&b.utility) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.path_distance.total_cmp(&b.path_distance) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => a.node < b.node,
        },
    }
}

/// Position (in `candidates`) of the highest-utility candidate. Ties go to the
/// shorter tree path from the root, then to the lower node index.
pub fn select_nbv(candidates: &[ScanCandidate]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if best.is_none_or(|b| better(c, &candidates[b])) {
            best = Some(i);
        }
    }
    best.ok_or(Error::NoCandidates)
}

/// Stop when the best utility falls strictly below the threshold.
pub fn check_termination(u_best: f64, u_thres: f64) -> bool {
    u_best < u_thres
}
