use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costs::CostParams;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Pose};
use crate::info_gain::{IgParams, ViKind};
use crate::occupancy::OccupancyParams;
use crate::planner::PlannerParams;
use crate::sensor::{FilterParams, LidarModel, ScanActionModel};
use crate::terrain::TerrainParams;

/// Parameter presets. `sim` grows 150 candidates over a 12 m map, `real` 75
/// candidates over 7 m.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Sim,
    Real,
}

impl Profile {
    pub fn n_nodes(&self) -> usize {
        match self {
            Profile::Sim => 150,
            Profile::Real => 75,
        }
    }

    pub fn map_extent(&self) -> f64 {
        match self {
            Profile::Sim => 12.0,
            Profile::Real => 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// OBJ file, relative to the config file.
    pub mesh: PathBuf,
    pub object_bbox: Aabb,
    pub start: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationParams {
    /// Spacing of the ground-truth surface samples, metres.
    pub gt_spacing: f64,
    pub gt_seed: u64,
    /// Coverage distance; defaults to the voxel centre-to-corner distance.
    pub coverage_threshold: Option<f64>,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        Self {
            gt_spacing: 0.05,
            gt_seed: 0,
            coverage_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    #[serde(default)]
    pub profile: Profile,
    #[serde(default = "default_vi")]
    pub vi: ViKind,
    #[serde(default = "default_max_scans")]
    pub max_scans: usize,
    #[serde(default)]
    pub rng_seed: u64,
    pub scene: SceneConfig,
    #[serde(default)]
    pub octree: OccupancyParams,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default)]
    pub scan_action: ScanActionModel,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub info_gain: IgParams,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub costs: CostParams,
    #[serde(default)]
    pub terrain: TerrainParams,
    #[serde(default)]
    pub evaluation: EvaluationParams,
}

fn default_vi() -> ViKind {
    ViKind::OcclusionAware
}

fn default_max_scans() -> usize {
    20
}

impl EpisodeConfig {
    /// Config with defaults for everything but the scene.
    pub fn new(scene: SceneConfig, profile: Profile) -> Self {
        let mut cfg = Self {
            profile,
            vi: default_vi(),
            max_scans: default_max_scans(),
            rng_seed: 0,
            scene,
            octree: OccupancyParams::default(),
            lidar: LidarModel::default(),
            scan_action: ScanActionModel::default(),
            filter: FilterParams::default(),
            info_gain: IgParams::default(),
            planner: PlannerParams::default(),
            costs: CostParams::default(),
            terrain: TerrainParams::default(),
            evaluation: EvaluationParams::default(),
        };
        cfg.planner.n_nodes = profile.n_nodes();
        cfg.terrain.extent = profile.map_extent();
        cfg
    }

    /// Parses TOML. Profile presets fill `planner.n_nodes` and `terrain.extent`
    /// unless the file sets them; a relative mesh path is resolved against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut cfg: EpisodeConfig = table
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let is_set = |section: &str, key: &str| {
            table
                .get(section)
                .and_then(|s| s.as_table())
                .is_some_and(|s| s.contains_key(key))
        };
        if !is_set("planner", "n_nodes") {
            cfg.planner.n_nodes = cfg.profile.n_nodes();
        }
        if !is_set("terrain", "extent") {
            cfg.terrain.extent = cfg.profile.map_extent();
        }
        if cfg.scene.mesh.is_relative() {
            cfg.scene.mesh = base_dir.join(&cfg.scene.mesh);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_scans < 1 {
            return Err(Error::invalid("max_scans", "must be at least 1"));
        }
        if !self.scene.object_bbox.is_non_degenerate() {
            return Err(Error::invalid("object_bbox", "degenerate box"));
        }
        self.octree.validate()?;
        self.lidar.validate()?;
        self.scan_action.validate()?;
        self.info_gain.validate()?;
        self.planner.validate()?;
        self.costs.validate()?;
        self.terrain.validate()?;
        if !(self.evaluation.gt_spacing > 0.0) {
            return Err(Error::invalid("gt_spacing", "must be positive"));
        }
        if self.filter.leaf_size <= 0.0 {
            return Err(Error::invalid("leaf_size", "must be positive"));
        }
        Ok(())
    }

    pub fn coverage_threshold(&self) -> f64 {
        self.evaluation
            .coverage_threshold
            .unwrap_or_else(|| crate::evaluation::default_threshold(self.octree.resolution))
    }
}
