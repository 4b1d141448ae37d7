//! Probabilistic occupancy map over a bounded region of interest.
//!
//! Occupancy is stored as clamped log-odds in a sparse voxel store keyed at the
//! finest resolution. Voxels that were never observed are not stored and read
//! back as probability 0.5. The store is updated from sweeps by casting a ray
//! from the sensor origin to every endpoint: traversed voxels receive a miss,
//! the endpoint voxel a hit.

use std::fmt::Write as _;
use std::io::BufRead;

use nalgebra::{Point3, Vector3};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Aabb;

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Integer voxel index at the map's finest resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelKey {
    pub const fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }

    fn axis(&self, a: usize) -> i32 {
        match a {
            0 => self.i,
            1 => self.j,
            _ => self.k,
        }
    }

    fn axis_mut(&mut self, a: usize) -> &mut i32 {
        match a {
            0 => &mut self.i,
            1 => &mut self.j,
            _ => &mut self.k,
        }
    }

    /// The six face-adjacent keys.
    pub fn face_neighbors(&self) -> [VoxelKey; 6] {
        let VoxelKey { i, j, k } = *self;
        [
            VoxelKey::new(i - 1, j, k),
            VoxelKey::new(i + 1, j, k),
            VoxelKey::new(i, j - 1, k),
            VoxelKey::new(i, j + 1, k),
            VoxelKey::new(i, j, k - 1),
            VoxelKey::new(i, j, k + 1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OccupancyState {
    Free,
    Occupied,
    Unknown,
}

/// Sensor-model and classification parameters, expressed as probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupancyParams {
    pub resolution: f64,
    pub hit_probability: f64,
    pub miss_probability: f64,
    pub clamp_min_probability: f64,
    pub clamp_max_probability: f64,
    pub occupied_threshold: f64,
    pub free_threshold: f64,
    /// Margin added around the object bounding box to form the map bounds.
    pub margin: f64,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            hit_probability: 0.7,
            miss_probability: 0.4,
            clamp_min_probability: 0.12,
            clamp_max_probability: 0.97,
            occupied_threshold: 0.65,
            free_threshold: 0.35,
            margin: 2.0,
        }
    }
}

impl OccupancyParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |p: f64| p > 0.0 && p < 1.0;
        if !(self.resolution > 0.0) {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        for (name, p) in [
            ("hit_probability", self.hit_probability),
            ("miss_probability", self.miss_probability),
            ("clamp_min_probability", self.clamp_min_probability),
            ("clamp_max_probability", self.clamp_max_probability),
        ] {
            if !open_unit(p) {
                return Err(Error::invalid(name, format!("{p} not in (0, 1)")));
            }
        }
        if !(self.occupied_threshold > 0.5 && 0.5 > self.free_threshold && self.free_threshold > 0.0) {
            return Err(Error::invalid(
                "occupied_threshold",
                "need occupied_threshold > 0.5 > free_threshold > 0",
            ));
        }
        if self.clamp_min_probability >= self.clamp_max_probability {
            return Err(Error::invalid("clamp_min_probability", "must be below the max clamp"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::invalid("margin", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayTerminal {
    /// Stopped at (and including) the first occupied voxel.
    Hit,
    MaxRange,
    /// Left the map bounds.
    Boundary,
    /// The origin was outside the map; nothing traversed.
    OriginOutOfBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayTraversal {
    /// Voxels in traversal order, excluding the voxel that contains the origin.
    pub voxels: Vec<VoxelKey>,
    pub terminal: RayTerminal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertSummary {
    pub voxels_touched: usize,
    pub hits: usize,
    pub misses: usize,
    pub skipped_zero_length: usize,
    pub skipped_out_of_bounds: usize,
}

#[derive(Debug, Clone)]
pub struct OccupancyOctree {
    resolution: f64,
    origin: Point3<f64>,
    dims: [i32; 3],
    cells: FxHashMap<VoxelKey, f64>,
    clamp_min: f64,
    clamp_max: f64,
    hit_update: f64,
    miss_update: f64,
    occupied_logodds: f64,
    free_logodds: f64,
}

impl OccupancyOctree {
    /// Creates an empty map covering `bounds`. The key grid starts at `bounds.min`.
    pub fn new(bounds: &Aabb, params: &OccupancyParams) -> Result<Self> {
        params.validate()?;
        if !bounds.is_non_degenerate() {
            return Err(Error::invalid("bounds", "degenerate map bounds"));
        }
        let e = bounds.extent();
        let dims = [0, 1, 2].map(|a| ((e[a] / params.resolution) - 1e-9).ceil().max(1.0) as i32);
        Ok(Self::with_grid(bounds.min, dims, params))
    }

    fn with_grid(origin: Point3<f64>, dims: [i32; 3], params: &OccupancyParams) -> Self {
        Self {
            resolution: params.resolution,
            origin,
            dims,
            cells: FxHashMap::default(),
            clamp_min: logit(params.clamp_min_probability),
            clamp_max: logit(params.clamp_max_probability),
            hit_update: logit(params.hit_probability),
            miss_update: logit(params.miss_probability),
            occupied_logodds: logit(params.occupied_threshold),
            free_logodds: logit(params.free_threshold),
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn dims(&self) -> [i32; 3] {
        self.dims
    }

    pub fn clamp_range(&self) -> (f64, f64) {
        (self.clamp_min, self.clamp_max)
    }

    pub fn bounds(&self) -> Aabb {
        let max = self.origin
            + Vector3::new(
                self.dims[0] as f64 * self.resolution,
                self.dims[1] as f64 * self.resolution,
                self.dims[2] as f64 * self.resolution,
            );
        Aabb::new(self.origin, max)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Stored cells in key order.
    pub fn sorted_cells(&self) -> Vec<(VoxelKey, f64)> {
        let mut v: Vec<_> = self.cells.iter().map(|(k, l)| (*k, *l)).collect();
        v.sort_by_key(|(k, _)| *k);
        v
    }

    pub fn contains_key(&self, key: &VoxelKey) -> bool {
        (0..3).all(|a| key.axis(a) >= 0 && key.axis(a) < self.dims[a])
    }

    pub fn key_of(&self, p: &Point3<f64>) -> Option<VoxelKey> {
        let rel = (p - self.origin) / self.resolution;
        let f = rel.map(f64::floor);
        if !(0..3).all(|a| f[a] >= 0.0 && f[a] < self.dims[a] as f64) {
            return None;
        }
        Some(VoxelKey::new(f.x as i32, f.y as i32, f.z as i32))
    }

    pub fn center_of(&self, key: &VoxelKey) -> Point3<f64> {
        self.origin
            + Vector3::new(
                (key.i as f64 + 0.5) * self.resolution,
                (key.j as f64 + 0.5) * self.resolution,
                (key.k as f64 + 0.5) * self.resolution,
            )
    }

    pub fn log_odds(&self, key: &VoxelKey) -> Option<f64> {
        self.cells.get(key).copied()
    }

    /// Occupancy probability; 0.5 for voxels never observed.
    pub fn probability(&self, key: &VoxelKey) -> f64 {
        self.cells.get(key).map_or(0.5, |l| logistic(*l))
    }

    pub fn state(&self, key: &VoxelKey) -> OccupancyState {
        match self.cells.get(key) {
            Some(&l) if l > self.occupied_logodds => OccupancyState::Occupied,
            Some(&l) if l < self.free_logodds => OccupancyState::Free,
            _ => OccupancyState::Unknown,
        }
    }

    pub fn is_occupied(&self, key: &VoxelKey) -> bool {
        self.state(key) == OccupancyState::Occupied
    }

    /// Overwrites a voxel's log-odds, clamped to the configured limits.
    pub fn set_log_odds(&mut self, key: VoxelKey, log_odds: f64) {
        if self.contains_key(&key) {
            self.cells.insert(key, log_odds.clamp(self.clamp_min, self.clamp_max));
        }
    }

    fn add_log_odds(&mut self, key: VoxelKey, delta: f64) {
        let (lo, hi) = (self.clamp_min, self.clamp_max);
        let l = self.cells.entry(key).or_insert(0.0);
        *l = (*l + delta).clamp(lo, hi);
    }

    pub fn apply_hit(&mut self, key: VoxelKey) {
        self.add_log_odds(key, self.hit_update);
    }

    pub fn apply_miss(&mut self, key: VoxelKey) {
        self.add_log_odds(key, self.miss_update);
    }

    /// Integrates one sweep. Each voxel is updated at most once per sweep: endpoint
    /// voxels get a hit, voxels crossed on the way get a miss unless some other ray
    /// ended in them.
    pub fn insert_sweep(&mut self, points: &[Point3<f64>], sensor_origin: &Point3<f64>) -> Result<InsertSummary> {
        let origin_key = self.key_of(sensor_origin).ok_or(Error::OriginOutOfBounds {
            x: sensor_origin.x,
            y: sensor_origin.y,
            z: sensor_origin.z,
        })?;
        if points.is_empty() {
            return Err(Error::EmptySweep);
        }
        let mut summary = InsertSummary::default();
        let mut hits = FxHashSet::default();
        let mut misses = FxHashSet::default();
        for p in points {
            let Some(end_key) = self.key_of(p) else {
                summary.skipped_out_of_bounds += 1;
                continue;
            };
            if end_key == origin_key {
                summary.skipped_zero_length += 1;
                continue;
            }
            hits.insert(end_key);
            let delta = p - sensor_origin;
            let length = delta.norm();
            let dir = delta / length;
            self.walk(sensor_origin, origin_key, &dir, length, |key, _| {
                if key == end_key {
                    return false;
                }
                misses.insert(key);
                true
            });
        }
        for key in &hits {
            self.apply_hit(*key);
        }
        summary.hits = hits.len();
        for key in misses.difference(&hits) {
            self.apply_miss(*key);
            summary.misses += 1;
        }
        summary.voxels_touched = summary.hits + summary.misses;
        Ok(summary)
    }

    /// Voxel traversal from `origin` along `direction` (unit length), stopping at
    /// and including the first occupied voxel, at `max_range`, or at the map
    /// boundary. The origin voxel is not part of the result.
    pub fn raycast(&self, origin: &Point3<f64>, direction: &Vector3<f64>, max_range: f64) -> RayTraversal {
        let Some(origin_key) = self.key_of(origin) else {
            return RayTraversal {
                voxels: Vec::new(),
                terminal: RayTerminal::OriginOutOfBounds,
            };
        };
        let mut voxels = Vec::new();
        let mut hit = false;
        let end = self.walk(origin, origin_key, direction, max_range, |key, _| {
            voxels.push(key);
            if self.is_occupied(&key) {
                hit = true;
                return false;
            }
            true
        });
        let terminal = if hit { RayTerminal::Hit } else { end };
        RayTraversal { voxels, terminal }
    }

    /// Amanatides-Woo grid walk. Calls `visit(key, t_enter)` for every voxel entered
    /// after the origin voxel; `visit` returns false to stop. Returns why the walk
    /// ended when `visit` did not stop it.
    fn walk(
        &self,
        origin: &Point3<f64>,
        origin_key: VoxelKey,
        dir: &Vector3<f64>,
        max_range: f64,
        mut visit: impl FnMut(VoxelKey, f64) -> bool,
    ) -> RayTerminal {
        let mut key = origin_key;
        let mut step = [0i32; 3];
        let mut t_next = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let cell_lo = self.origin[a] + key.axis(a) as f64 * self.resolution;
            if dir[a] > 0.0 {
                step[a] = 1;
                t_next[a] = (cell_lo + self.resolution - origin[a]) / dir[a];
                t_delta[a] = self.resolution / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                t_next[a] = (cell_lo - origin[a]) / dir[a];
                t_delta[a] = -self.resolution / dir[a];
            }
        }
        loop {
            let a = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
                0
            } else if t_next[1] <= t_next[2] {
                1
            } else {
                2
            };
            let t = t_next[a];
            if !(t < max_range) {
                return RayTerminal::MaxRange;
            }
            *key.axis_mut(a) += step[a];
            if key.axis(a) < 0 || key.axis(a) >= self.dims[a] {
                return RayTerminal::Boundary;
            }
            t_next[a] += t_delta[a];
            if !visit(key, t) {
                return RayTerminal::Hit;
            }
        }
    }

    /// Text dump: a `resolution ox oy oz` header, a `# dims nx ny nz` comment,
    /// then one `i j k log_odds` line per stored voxel in key order.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        let o = self.origin;
        let _ = writeln!(s, "{} {} {} {}", self.resolution, o.x, o.y, o.z);
        let _ = writeln!(s, "# dims {} {} {}", self.dims[0], self.dims[1], self.dims[2]);
        for (k, l) in self.sorted_cells() {
            let _ = writeln!(s, "{} {} {} {}", k.i, k.j, k.k, l);
        }
        s
    }

    /// Reads a dump written by [`to_dump`](Self::to_dump). Without a `# dims`
    /// line the grid extent is taken from the largest stored key.
    pub fn from_dump(reader: impl BufRead, params: &OccupancyParams) -> Result<Self> {
        let bad = |reason: String| Error::parse("octree dump", reason);
        let mut header: Option<(f64, Point3<f64>)> = None;
        let mut dims: Option<[i32; 3]> = None;
        let mut cells = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut it = comment.split_whitespace();
                if it.next() == Some("dims") {
                    let v: Vec<i32> = it
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
                    if v.len() != 3 || v.iter().any(|d| *d <= 0) {
                        return Err(bad(format!("line {}: bad dims", n + 1)));
                    }
                    dims = Some([v[0], v[1], v[2]]);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", n + 1)));
            }
            if header.is_none() {
                let v: Vec<f64> = fields
                    .iter()
                    .map(|f| f.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(format!("header: {e}")))?;
                if !(v[0] > 0.0) {
                    return Err(bad("header: resolution must be positive".into()));
                }
                header = Some((v[0], Point3::new(v[1], v[2], v[3])));
                continue;
            }
            let parse_i = |f: &str| f.parse::<i32>().map_err(|e| bad(format!("line {}: {e}", n + 1)));
            let key = VoxelKey::new(parse_i(fields[0])?, parse_i(fields[1])?, parse_i(fields[2])?);
            let l = fields[3]
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
            cells.push((key, l));
        }
        let (resolution, origin) = header.ok_or_else(|| bad("missing header".into()))?;
        let dims = dims.unwrap_or_else(|| {
            let mut d = [1; 3];
            for (k, _) in &cells {
                for (a, dim) in d.iter_mut().enumerate() {
                    *dim = (*dim).max(k.axis(a) + 1);
                }
            }
            d
        });
        let params = OccupancyParams { resolution, ..*params };
        params.validate()?;
        let mut map = Self::with_grid(origin, dims, &params);
        for (key, l) in cells {
            if !map.contains_key(&key) {
                return Err(bad(format!("key {key:?} outside the grid")));
            }
            // Stored as written; the dump is a snapshot, not a sensor update.
            map.cells.insert(key, l);
        }
        Ok(map)
    }
}
