use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nbv_core::evaluation::{default_threshold, point_cloud_coverage};
use nbv_core::info_gain::{information_gain, IgParams};
use nbv_core::io::read_ply;
use nbv_core::mission::{run_episode, write_outputs, EpisodeConfig};
use nbv_core::scenes::BundledScene;
use nbv_core::{Aabb, OccupancyOctree, OccupancyParams, ViKind};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nbv", version, about = "Next-best-view active mapping simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mapping episode and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        vi: Option<ViKind>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Coverage of a ground-truth cloud by another cloud.
    Evaluate {
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        /// Defaults to the centre-to-corner distance of a 5 cm voxel.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Information gain of one pose against an octree dump.
    IgOracle {
        #[arg(long)]
        octree: PathBuf,
        /// Robot pose as x,y,z,yaw; the sensor sits `--mount-height` above it.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        pose: [f64; 4],
        /// Evaluates both kinds when omitted.
        #[arg(long)]
        vi: Option<ViKind>,
        #[arg(long, default_value_t = 0.7)]
        mount_height: f64,
        /// Object box as minx,miny,minz,maxx,maxy,maxz; defaults to the map bounds.
        #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
        bbox: Option<[f64; 6]>,
    },
    /// Write a bundled scene as OBJ.
    Scene {
        #[arg(long)]
        name: BundledScene,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    vals.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_pose(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

fn parse_bbox(s: &str) -> std::result::Result<[f64; 6], String> {
    parse_floats::<6>(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, vi, out } => {
            let mut cfg = EpisodeConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            if let Some(vi) = vi {
                cfg.vi = vi;
            }
            let log = run_episode(&cfg)?;
            write_outputs(&log, &out)?;
            println!(
                "{}",
                json!({
                    "vi": log.vi,
                    "termination": log.termination,
                    "n_s": log.metrics.n_s,
                    "d_t": log.metrics.d_t,
                    "final_coverage": log.metrics.coverage_per_step.last(),
                    "final_observable_coverage": log.metrics.observable_coverage_per_step.last(),
                    "out": out,
                })
            );
        }
        Command::Evaluate {
            ground_truth,
            cloud,
            threshold,
        } => {
            let load = |p: &PathBuf| -> Result<_> {
                let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                Ok(read_ply(BufReader::new(f))?)
            };
            let gt = load(&ground_truth)?;
            let acc = load(&cloud)?;
            let threshold = threshold.unwrap_or_else(|| default_threshold(0.05));
            let r = point_cloud_coverage(&gt, &acc, threshold)?;
            println!("{}", serde_json::to_string(&r)?);
        }
        Command::IgOracle {
            octree,
            pose,
            vi,
            mount_height,
            bbox,
        } => {
            let f = fs::File::open(&octree).with_context(|| format!("opening {}", octree.display()))?;
            let map = OccupancyOctree::from_dump(BufReader::new(f), &OccupancyParams::default())?;
            let bbox = match bbox {
                Some(b) => Aabb::new([b[0], b[1], b[2]].into(), [b[3], b[4], b[5]].into()),
                None => map.bounds(),
            };
            let origin = [pose[0], pose[1], pose[2] + mount_height].into();
            let kinds = vi.map_or(ViKind::ALL.to_vec(), |k| vec![k]);
            let mut gains = serde_json::Map::new();
            let mut rays = 0;
            for kind in kinds {
                let g = information_gain(&map, &origin, &IgParams::default(), kind, &bbox);
                if !g.origin_in_bounds {
                    bail!("sensor origin lies outside the map bounds");
                }
                rays = g.rays;
                gains.insert(kind.as_str().into(), json!({ "gain": g.gain, "voxels": g.voxels }));
            }
            println!("{}", json!({ "rays": rays, "gains": gains }));
        }
        Command::Scene { name, out } => {
            let scene = name.build();
            fs::write(&out, scene.mesh.to_obj_string())?;
            println!(
                "{}",
                json!({
                    "scene": name.as_str(),
                    "out": out,
                    "object_bbox": scene.mesh.object_bbox(),
                    "start": scene.start,
                    "margin": scene.margin,
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<nbv_core::Error>().map_or("error", |e| e.kind());
            eprintln!("{}", json!({ "error": kind, "message": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
