use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PathPlan, PlannerParams, ValidityChecker};
use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrtStarOutcome {
    pub plan: PathPlan,
    /// Length of the first feasible path found; the returned plan is never longer.
    pub first_solution_length: f64,
    pub iterations: usize,
    pub tree_size: usize,
}

struct Tree {
    xy: Vec<[f64; 2]>,
    parent: Vec<usize>,
    cost: Vec<f64>,
    children: Vec<Vec<usize>>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

impl Tree {
    fn nearest(&self, p: [f64; 2]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.xy.iter().enumerate() {
            let d = dist(*q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn near(&self, p: [f64; 2], r: f64) -> Vec<usize> {
        (0..self.xy.len()).filter(|&i| dist(self.xy[i], p) <= r).collect()
    }

    fn reparent(&mut self, node: usize, new_parent: usize) {
        let old = self.parent[node];
        self.children[old].retain(|&c| c != node);
        self.children[new_parent].push(node);
        self.parent[node] = new_parent;
        let delta = self.cost[new_parent] + dist(self.xy[new_parent], self.xy[node]) - self.cost[node];
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.cost[n] += delta;
            stack.extend(self.children[n].iter().copied());
        }
    }

    fn chain(&self, node: usize) -> Vec<[f64; 2]> {
        let mut out = vec![self.xy[node]];
        let mut cur = node;
        while cur != 0 {
            cur = self.parent[cur];
            out.push(self.xy[cur]);
        }
        out.reverse();
        out
    }
}

/// Greedy shortcutting: from each kept point jump to the farthest later point
/// reachable by a valid straight edge.
fn shortcut(points: &[[f64; 2]], checker: &ValidityChecker<'_>) -> Vec<[f64; 2]> {
    let mut out = vec![points[0]];
    let mut i = 0;
    while i + 1 < points.len() {
        let mut j = points.len() - 1;
        while j > i + 1 && !checker.edge_ok(points[i], points[j]) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

/// Converts a polyline into poses whose consecutive spacing is at most `step`.
/// Every pose after the start faces along its incoming segment.
fn densify(points: &[[f64; 2]], start: &Pose, step: f64, checker: &ValidityChecker<'_>) -> Vec<Pose> {
    let mut poses = vec![*start];
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = dist(a, b);
        if d < 1e-12 {
            continue;
        }
        let yaw = (b[1] - a[1]).atan2(b[0] - a[0]);
        let n = (d / step).ceil() as usize;
        for k in 1..=n {
            let f = k as f64 / n as f64;
            let z = poses.last().map_or(start.position.z, |p| p.position.z);
            poses.push(checker.pose_at(a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), yaw, z));
        }
    }
    poses
}

/// Replans from `start` to `goal` with RRT*. The raw tree path is shortcut and
/// then densified so that every segment is at most one steering step.
pub fn replan_rrt_star(
    start: &Pose,
    goal: &Pose,
    checker: &ValidityChecker<'_>,
    params: &PlannerParams,
    rng_seed: u64,
) -> Result<RrtStarOutcome> {
    params.validate()?;
    let s = [start.x(), start.y()];
    let g = [goal.x(), goal.y()];
    if !checker.point_ok(s[0], s[1]) {
        return Err(Error::Planner("start pose is not traversable".into()));
    }
    if !checker.point_ok(g[0], g[1]) {
        return Err(Error::Planner("goal pose is not traversable".into()));
    }
    if dist(s, g) < 1e-9 {
        return Ok(RrtStarOutcome {
            plan: PathPlan::from_waypoints(vec![*start]),
            first_solution_length: 0.0,
            iterations: 0,
            tree_size: 1,
        });
    }

    let (x0, y0, x1, y1) = checker.map.extent_box();
    let area = (x1 - x0) * (y1 - y0);
    let gamma = 2.0 * 1.5f64.sqrt() * (area / PI).sqrt();
    let r_cap = 2.0 * params.step;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut tree = Tree {
        xy: vec![s],
        parent: vec![0],
        cost: vec![0.0],
        children: vec![Vec::new()],
    };
    // nodes from which the goal is reachable by a valid edge within tolerance
    let mut goal_parents: Vec<usize> = Vec::new();
    let mut first_solution: Option<f64> = None;
    let mut iterations = 0;

    for _ in 0..params.rrt_star_iterations {
        iterations += 1;
        let sample = if rng.random::<f64>() < params.goal_bias {
            g
        } else {
            [rng.random_range(x0..x1), rng.random_range(y0..y1)]
        };
        let near_i = tree.nearest(sample);
        let from = tree.xy[near_i];
        let d = dist(from, sample);
        if d < 1e-9 {
            continue;
        }
        let step = d.min(params.step);
        let new = [
            from[0] + (sample[0] - from[0]) / d * step,
            from[1] + (sample[1] - from[1]) / d * step,
        ];
        if !checker.edge_ok(from, new) {
            continue;
        }
        let n = tree.xy.len() as f64 + 1.0;
        let radius = (gamma * (n.ln() / n).sqrt()).min(r_cap).max(params.step);
        let near = tree.near(new, radius);

        let mut best_parent = near_i;
        let mut best_cost = tree.cost[near_i] + step;
        for &j in &near {
            let c = tree.cost[j] + dist(tree.xy[j], new);
            if c < best_cost && j != near_i && checker.edge_ok(tree.xy[j], new) {
                best_parent = j;
                best_cost = c;
            }
        }
        let id = tree.xy.len();
        tree.xy.push(new);
        tree.parent.push(best_parent);
        tree.cost.push(best_cost);
        tree.children.push(Vec::new());
        tree.children[best_parent].push(id);

        for &j in &near {
            if j == best_parent || j == 0 {
                continue;
            }
            let c = best_cost + dist(new, tree.xy[j]);
            if c + 1e-12 < tree.cost[j] && checker.edge_ok(new, tree.xy[j]) {
                tree.reparent(j, id);
            }
        }

        if dist(new, g) <= params.goal_tolerance && checker.edge_ok(new, g) {
            goal_parents.push(id);
            if first_solution.is_none() {
                first_solution = Some(best_cost + dist(new, g));
            }
        }
    }

    let Some(first_solution_length) = first_solution else {
        return Err(Error::Planner(format!("no path to goal after {iterations} iterations")));
    };
    let best = goal_parents
        .iter()
        .copied()
        .min_by(|&a, &b| (tree.cost[a] + dist(tree.xy[a], g)).total_cmp(&(tree.cost[b] + dist(tree.xy[b], g))))
        .expect("at least one goal parent");
    let mut chain = tree.chain(best);
    if dist(*chain.last().expect("non-empty chain"), g) > 1e-12 {
        chain.push(g);
    }
    let short = shortcut(&chain, checker);
    let plan = PathPlan::from_waypoints(densify(&short, start, params.step, checker));
    Ok(RrtStarOutcome {
        plan,
        first_solution_length,
        iterations,
        tree_size: tree.xy.len(),
    })
}
