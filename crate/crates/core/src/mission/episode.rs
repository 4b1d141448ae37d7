use std::time::Instant;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::EpisodeConfig;
use crate::costs::{position_cost, traversal_cost, ScanCandidate, VisitedRegistry};
use crate::error::{Error, Result};
use crate::evaluation::{
    coverage_with_index, observable_mask, sample_surface, side_face_mask, EpisodeMetrics, GroundTruth,
};
use crate::geometry::Pose;
use crate::info_gain::{information_gain, ViKind};
use crate::occupancy::{InsertSummary, OccupancyOctree};
use crate::planner::{check_termination, grow_rrt, replan_rrt_star, select_nbv, PathPlan, ValidityChecker};
use crate::sensor::{downsample_filter, simulate_scan, SceneMesh};
use crate::spatial::PointIndex;
use crate::terrain::{build_elevation_map, compute_traversability, is_pose_valid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Threshold,
    MaxScans,
    PlannerFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSource {
    RrtStar,
    /// RRT* failed; the robot follows the candidate tree branch instead.
    RrtTree,
}

/// What happened after one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based scan index.
    pub step: usize,
    pub scan_pose: Pose,
    pub raw_points: usize,
    pub filtered_points: usize,
    pub insert: InsertSummary,
    pub coverage: f64,
    pub observable_coverage: f64,
    pub side_coverage: f64,
    pub candidates: Vec<ScanCandidate>,
    pub tree_partial: bool,
    pub nbv: Option<ScanCandidate>,
    pub path: Option<PathPlan>,
    pub path_source: Option<PathSource>,
    /// Cumulative travel distance after executing this step's path.
    pub d_t: f64,
    /// Information gain, cost and selection time, seconds.
    #[serde(skip)]
    pub t_nbv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub vi: ViKind,
    pub rng_seed: u64,
    pub steps: Vec<StepRecord>,
    pub metrics: EpisodeMetrics,
    pub termination: TerminationReason,
    /// Diagnostic of the planner failure, if any.
    pub failure: Option<String>,
    /// Every pose the robot occupied, start first.
    pub pose_history: Vec<Pose>,
    pub ground_truth_size: usize,
    pub accumulated: Vec<Point3<f64>>,
    #[serde(skip)]
    pub octree: Option<OccupancyOctree>,
}

/// Stream-splitting seed for sub-stage `stage` of scan `step`.
fn sub_seed(seed: u64, step: usize, stage: u64) -> u64 {
    let mut z = seed
        .wrapping_add((step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stage.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ground the robot has stood on is known to be flat and free; the LiDAR cannot
/// see under the body, so these proprioceptive samples seed the elevation map.
fn footprint_support(pose: &Pose, radius: f64, spacing: f64) -> Vec<Point3<f64>> {
    let r = radius + 2.0 * spacing;
    let n = (r / spacing).ceil() as i64;
    let mut pts = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let (dx, dy) = (i as f64 * spacing, j as f64 * spacing);
            if dx.hypot(dy) <= r {
                pts.push(Point3::new(pose.x() + dx, pose.y() + dy, pose.position.z));
            }
        }
    }
    pts
}

struct CoverageEval {
    gt: GroundTruth,
    observable: Vec<Point3<f64>>,
    side: Vec<Point3<f64>>,
    threshold: f64,
}

impl CoverageEval {
    fn new(config: &EpisodeConfig, scene: &SceneMesh) -> Result<Self> {
        let gt = sample_surface(scene, config.evaluation.gt_spacing, config.evaluation.gt_seed)?;
        if gt.is_empty() {
            return Err(Error::invalid("scene", "object has no surface inside its bounding box"));
        }
        let sensor_height = config.scene.start.position.z + config.lidar.mount_height;
        let max_el = config
            .scan_action
            .effective_vertical_fov(&config.lidar)
            .min(89.0)
            .to_radians();
        let observable = gt.subset(&observable_mask(&gt, sensor_height, max_el));
        let side = gt.subset(&side_face_mask(&gt));
        Ok(Self {
            gt,
            observable,
            side,
            threshold: config.coverage_threshold(),
        })
    }

    fn measure(&self, index: &PointIndex) -> Result<(f64, f64, f64)> {
        let sub = |pts: &[Point3<f64>]| -> Result<f64> {
            if pts.is_empty() {
                return Ok(0.0);
            }
            Ok(coverage_with_index(pts, index, self.threshold)?.c_p)
        };
        Ok((
            coverage_with_index(&self.gt.points, index, self.threshold)?.c_p,
            sub(&self.observable)?,
            sub(&self.side)?,
        ))
    }
}

/// Loads the configured OBJ scene and runs an episode.
pub fn run_episode(config: &EpisodeConfig) -> Result<EpisodeLog> {
    config.validate()?;
    let scene = SceneMesh::load_obj(&config.scene.mesh, config.scene.object_bbox)?;
    run_episode_with_scene(config, &scene)
}

/// Runs the scan, map, plan, move loop until the best utility drops below the
/// threshold, the scan budget is spent, or planning fails.
pub fn run_episode_with_scene(config: &EpisodeConfig, scene: &SceneMesh) -> Result<EpisodeLog> {
    config.validate()?;
    let t_start = Instant::now();
    let object_bbox = config.scene.object_bbox;
    let map_bounds = object_bbox.inflate(config.octree.margin);
    let mut octree = OccupancyOctree::new(&map_bounds, &config.octree)?;
    let coverage = CoverageEval::new(config, scene)?;
    let footprint = config.terrain.footprint_radius;

    let mut pose = config.scene.start;
    let mut pose_history = vec![pose];
    let mut visited = VisitedRegistry::new();
    let mut accumulated: Vec<Point3<f64>> = Vec::new();
    let mut support = footprint_support(&pose, footprint, config.terrain.cell_size / 2.0);
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut d_t = 0.0;
    let mut failure = None;
    let mut termination = TerminationReason::MaxScans;

    for k in 1..=config.max_scans {
        let wrap = |e: Error| Error::Step {
            step: k,
            source: Box::new(e),
        };

        let sweep = simulate_scan(
            scene,
            &pose,
            &config.lidar,
            &config.scan_action,
            sub_seed(config.rng_seed, k, 0),
        )
        .map_err(wrap)?;
        let raw_points = sweep.points.len();
        let filtered = downsample_filter(&sweep, &config.filter).map_err(wrap)?;
        let insert = octree
            .insert_sweep(&filtered.points, &filtered.sensor_origin)
            .map_err(wrap)?;
        accumulated.extend_from_slice(&filtered.points);
        visited.push(pose);

        let index = PointIndex::new(&accumulated);
        let (c_full, c_obs, c_side) = coverage.measure(&index).map_err(wrap)?;

        let mut record = StepRecord {
            step: k,
            scan_pose: pose,
            raw_points,
            filtered_points: filtered.points.len(),
            insert,
            coverage: c_full,
            observable_coverage: c_obs,
            side_coverage: c_side,
            candidates: Vec::new(),
            tree_partial: false,
            nbv: None,
            path: None,
            path_source: None,
            d_t,
            t_nbv: 0.0,
        };
        log::info!(
            "scan {k}: {} points kept, coverage {c_full:.4} (observable {c_obs:.4})",
            record.filtered_points
        );

        if k == config.max_scans {
            steps.push(record);
            break;
        }

        let mut terrain_points = accumulated.clone();
        terrain_points.extend_from_slice(&support);
        let elevation = build_elevation_map(&terrain_points, &pose, config.terrain.extent, config.terrain.cell_size);
        let mut trav = compute_traversability(
            &elevation,
            config.terrain.slope_max.to_radians(),
            config.terrain.step_max,
        );
        trav.assume_safe(pose.x(), pose.y(), footprint);
        let checker = ValidityChecker::new(&trav, footprint, config.planner.edge_resolution);

        let growth = match grow_rrt(&pose, &checker, &config.planner, sub_seed(config.rng_seed, k, 1)) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("scan {k}: {e}");
                failure = Some(e.to_string());
                termination = TerminationReason::PlannerFailure;
                steps.push(record);
                break;
            }
        };
        record.tree_partial = growth.partial;
        let tree = &growth.tree;

        let t_nbv = Instant::now();
        let candidates: Vec<ScanCandidate> = (1..tree.len())
            .into_par_iter()
            .filter_map(|node| {
                let c = tree.nodes[node];
                let origin = config.lidar.sensor_origin(&c);
                if !map_bounds.contains(&origin) {
                    return None;
                }
                let g = information_gain(&octree, &origin, &config.info_gain, config.vi, &object_bbox).gain;
                let p = position_cost(&c, &visited, &object_bbox, &config.costs.position);
                let t = traversal_cost(&c, &pose, &trav, &config.costs.traversal);
                Some(ScanCandidate::new(node, c, tree.cost[node], g, p, t))
            })
            .collect();
        let best = select_nbv(&candidates);
        record.t_nbv = t_nbv.elapsed().as_secs_f64();
        record.candidates = candidates;
        let best = match best {
            Ok(b) => record.candidates[b],
            Err(e) => {
                log::warn!("scan {k}: {e}");
                failure = Some(format!("no scan candidate inside the map bounds: {e}"));
                termination = TerminationReason::PlannerFailure;
                steps.push(record);
                break;
            }
        };
        record.nbv = Some(best);

        if check_termination(best.utility, config.planner.u_thres) {
            log::info!("scan {k}: best utility {:.5} below threshold", best.utility);
            termination = TerminationReason::Threshold;
            steps.push(record);
            break;
        }

        let tree_branch = || (PathPlan::from_waypoints(tree.path_to(best.node)), PathSource::RrtTree);
        let (plan, source) = match replan_rrt_star(
            &pose,
            &best.pose,
            &checker,
            &config.planner,
            sub_seed(config.rng_seed, k, 2),
        ) {
            Ok(out) if out.plan.waypoints.iter().all(|w| is_pose_valid(w, &trav, footprint)) => {
                (out.plan, PathSource::RrtStar)
            }
            Ok(_) => {
                log::warn!("scan {k}: replanned path left the safe area; following the candidate tree branch");
                tree_branch()
            }
            Err(e) => {
                log::warn!("scan {k}: {e}; following the candidate tree branch");
                tree_branch()
            }
        };
        if let Some(bad) = plan.waypoints.iter().find(|w| !is_pose_valid(w, &trav, footprint)) {
            return Err(wrap(Error::Planner(format!(
                "waypoint ({:.3}, {:.3}) failed validation",
                bad.x(),
                bad.y()
            ))));
        }
        for w in plan.waypoints.iter().skip(1) {
            support.extend(footprint_support(w, footprint, config.terrain.cell_size / 2.0));
            pose_history.push(*w);
        }
        d_t += plan.length;
        pose = *plan.waypoints.last().expect("plan has a start waypoint");
        record.d_t = d_t;
        record.path = Some(plan);
        record.path_source = Some(source);
        steps.push(record);
    }

    let n_s = steps.len();
    let planning_steps = steps
        .iter()
        .filter(|s| s.nbv.is_some() || !s.candidates.is_empty())
        .count();
    let t_nbv = if planning_steps == 0 {
        0.0
    } else {
        steps.iter().map(|s| s.t_nbv).sum::<f64>() / planning_steps as f64
    };
    let metrics = EpisodeMetrics {
        d_t,
        n_s,
        t_all: t_start.elapsed().as_secs_f64(),
        t_nbv,
        coverage_per_step: steps.iter().map(|s| s.coverage).collect(),
        observable_coverage_per_step: steps.iter().map(|s| s.observable_coverage).collect(),
        side_coverage_per_step: steps.iter().map(|s| s.side_coverage).collect(),
    };
    Ok(EpisodeLog {
        vi: config.vi,
        rng_seed: config.rng_seed,
        steps,
        metrics,
        termination,
        failure,
        pose_history,
        ground_truth_size: coverage.gt.len(),
        accumulated,
        octree: Some(octree),
    })
}
