//! Episode configuration, the scan-plan-move loop, and artifact output.

mod config;
mod episode;
mod output;

pub use config::{EpisodeConfig, EvaluationParams, Profile, SceneConfig};
pub use episode::{run_episode, run_episode_with_scene, EpisodeLog, PathSource, StepRecord, TerminationReason};
pub use output::{deterministic_metrics, metrics_json, steps_csv, write_outputs};
