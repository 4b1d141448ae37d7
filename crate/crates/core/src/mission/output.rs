use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::episode::EpisodeLog;
use crate::error::Result;
use crate::io::write_ply;

/// Metrics document. Wall-clock figures live under `"timing"` so the rest of the
/// document is reproducible byte for byte.
pub fn metrics_json(log: &EpisodeLog) -> Value {
    let m = &log.metrics;
    json!({
        "vi": log.vi,
        "rng_seed": log.rng_seed,
        "termination": log.termination,
        "failure": log.failure,
        "d_t": m.d_t,
        "n_s": m.n_s,
        "final_coverage": m.coverage_per_step.last().copied().unwrap_or(0.0),
        "coverage_per_step": m.coverage_per_step,
        "observable_coverage_per_step": m.observable_coverage_per_step,
        "side_coverage_per_step": m.side_coverage_per_step,
        "ground_truth_points": log.ground_truth_size,
        "accumulated_points": log.accumulated.len(),
        "timing": {
            "t_all": m.t_all,
            "t_nbv": m.t_nbv,
        },
    })
}

/// `metrics_json` without the timing block.
pub fn deterministic_metrics(log: &EpisodeLog) -> Value {
    let mut v = metrics_json(log);
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    v
}

pub fn steps_csv(log: &EpisodeLog) -> String {
    let mut s = String::from("step,c_p,c_p_observable,c_p_side,d_t,t_nbv,n_candidates,u_best\n");
    for r in &log.steps {
        let u = r.nbv.map_or(String::new(), |c| format!("{:.6}", c.utility));
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.4},{:.4},{},{}",
            r.step,
            r.coverage,
            r.observable_coverage,
            r.side_coverage,
            r.d_t,
            r.t_nbv,
            r.candidates.len(),
            u
        );
    }
    s
}

/// Writes `metrics.json`, `steps.csv`, `accumulated.ply`, `octree.txt` and one
/// `candidates_<k>.json` per scan into `dir`.
pub fn write_outputs(log: &EpisodeLog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics_json(log))? + "\n",
    )?;
    fs::write(dir.join("steps.csv"), steps_csv(log))?;
    fs::write(dir.join("accumulated.ply"), write_ply(&log.accumulated))?;
    if let Some(octree) = &log.octree {
        fs::write(dir.join("octree.txt"), octree.to_dump())?;
    }
    for r in &log.steps {
        let doc = json!({
            "step": r.step,
            "scan_pose": r.scan_pose,
            "candidates": r.candidates,
            "tree_partial": r.tree_partial,
            "nbv": r.nbv,
            "path": r.path,
            "path_source": r.path_source,
        });
        fs::write(
            dir.join(format!("candidates_{}.json", r.step)),
            serde_json::to_string_pretty(&doc)?,
        )?;
    }
    Ok(())
}
