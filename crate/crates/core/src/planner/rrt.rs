use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PlannerParams, ValidityChecker};
use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Goal-free exploration tree. Node 0 is the root; every other node stores the
/// heading of its incoming edge as yaw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrtTree {
    pub nodes: Vec<Pose>,
    /// `parent[0]` is `None`.
    pub parent: Vec<Option<usize>>,
    /// Path length from the root along tree edges.
    pub cost: Vec<f64>,
}

impl RrtTree {
    pub fn root(&self) -> &Pose {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes from the root to `node`, inclusive.
    pub fn path_to(&self, node: usize) -> Vec<Pose> {
        let mut chain = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent[cur] {
            chain.push(p);
            cur = p;
        }
        chain.iter().rev().map(|&i| self.nodes[i]).collect()
    }

    fn nearest(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.x() - x).powi(2) + (n.y() - y).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtGrowth {
    pub tree: RrtTree,
    pub samples_drawn: usize,
    /// True when the sample budget ran out before `n_nodes` were placed.
    pub partial: bool,
}

/// Grows a tree of `params.n_nodes` nodes beyond the root by uniform sampling
/// over the traversability map extent.
pub fn grow_rrt(
    root: &Pose,
    checker: &ValidityChecker<'_>,
    params: &PlannerParams,
    rng_seed: u64,
) -> Result<RrtGrowth> {
    params.validate()?;
    if !checker.point_ok(root.x(), root.y()) {
        return Err(Error::Planner(format!(
            "root pose ({:.3}, {:.3}) is not traversable",
            root.x(),
            root.y()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (x0, y0, x1, y1) = checker.map.extent_box();
    let mut tree = RrtTree {
        nodes: vec![*root],
        parent: vec![None],
        cost: vec![0.0],
    };
    let budget = params.n_nodes * params.sample_budget_factor;
    let mut drawn = 0;
    while tree.len() <= params.n_nodes && drawn < budget {
        drawn += 1;
        let sx = rng.random_range(x0..x1);
        let sy = rng.random_range(y0..y1);
        let near = tree.nearest(sx, sy);
        let from = tree.nodes[near];
        let (dx, dy) = (sx - from.x(), sy - from.y());
        let d = dx.hypot(dy);
        if d < 1e-9 {
            continue;
        }
        let s = d.min(params.step);
        let (nx, ny) = (from.x() + dx / d * s, from.y() + dy / d * s);
        if !checker.edge_ok([from.x(), from.y()], [nx, ny]) {
            continue;
        }
        tree.nodes.push(checker.pose_at(nx, ny, dy.atan2(dx), from.position.z));
        tree.parent.push(Some(near));
        tree.cost.push(tree.cost[near] + s);
    }
    let placed = tree.len() - 1;
    if placed == 0 {
        return Err(Error::Planner(format!("no valid node placed after {drawn} samples")));
    }
    let partial = placed < params.n_nodes;
    if partial {
        log::warn!(
            "grow_rrt: placed {placed} of {} nodes within a budget of {budget} samples",
            params.n_nodes
        );
    }
    Ok(RrtGrowth {
        tree,
        samples_drawn: drawn,
        partial,
    })
}
