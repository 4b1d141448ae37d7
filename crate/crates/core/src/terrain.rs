//! Robot-centred 2.5D elevation map and binary traversability.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainParams {
    /// Side length of the square map, metres.
    pub extent: f64,
    pub cell_size: f64,
    /// Maximum traversable slope, degrees.
    pub slope_max: f64,
    /// Maximum height difference to any neighbouring cell, metres.
    pub step_max: f64,
    pub footprint_radius: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            extent: 12.0,
            cell_size: 0.1,
            slope_max: 20.0,
            step_max: 0.15,
            footprint_radius: 0.4,
        }
    }
}

impl TerrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) {
            return Err(Error::invalid("cell_size", "must be positive"));
        }
        if !(self.extent >= self.cell_size) {
            return Err(Error::invalid("extent", "must be at least one cell"));
        }
        if !(self.slope_max >= 0.0 && self.slope_max <= 90.0) {
            return Err(Error::invalid("slope_max", "must be in [0, 90] degrees"));
        }
        if !(self.step_max >= 0.0) {
            return Err(Error::invalid("step_max", "must be non-negative"));
        }
        if !(self.footprint_radius >= 0.0) {
            return Err(Error::invalid("footprint_radius", "must be non-negative"));
        }
        Ok(())
    }
}

/// Square height grid; `heights[iy * n + ix]` is `None` for cells without points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationMap {
    pub center: [f64; 2],
    pub extent: f64,
    pub cell_size: f64,
    pub n: usize,
    pub heights: Vec<Option<f64>>,
}

impl ElevationMap {
    pub fn origin(&self) -> [f64; 2] {
        [self.center[0] - self.extent / 2.0, self.center[1] - self.extent / 2.0]
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let o = self.origin();
        let fx = ((x - o[0]) / self.cell_size).floor();
        let fy = ((y - o[1]) / self.cell_size).floor();
        let n = self.n as f64;
        (fx >= 0.0 && fy >= 0.0 && fx < n && fy < n).then_some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let o = self.origin();
        [
            o[0] + (ix as f64 + 0.5) * self.cell_size,
            o[1] + (iy as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    pub fn height(&self, ix: usize, iy: usize) -> Option<f64> {
        self.heights[self.index(ix, iy)]
    }

    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        let (ix, iy) = self.cell_of(x, y)?;
        self.height(ix, iy)
    }

    pub fn known_count(&self) -> usize {
        self.heights.iter().filter(|h| h.is_some()).count()
    }

    /// Rows of comma-separated heights, `nan` for unknown cells; first row is the
    /// lowest y.
    pub fn heights_csv(&self) -> String {
        let mut s = String::new();
        for iy in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|ix| {
                    self.height(ix, iy)
                        .map_or_else(|| "nan".to_string(), |h| format!("{h:.4}"))
                })
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Builds the elevation map centred on the robot. Each cell holds the median
/// height of the points that fall into it.
pub fn build_elevation_map(points: &[Point3<f64>], robot_pose: &Pose, extent: f64, cell_size: f64) -> ElevationMap {
    let n = ((extent / cell_size).round() as usize).max(1);
    let mut map = ElevationMap {
        center: [robot_pose.x(), robot_pose.y()],
        extent: n as f64 * cell_size,
        cell_size,
        n,
        heights: vec![None; n * n],
    };
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    for p in points {
        if let Some((ix, iy)) = map.cell_of(p.x, p.y) {
            buckets[iy * n + ix].push(p.z);
        }
    }
    for (h, mut b) in map.heights.iter_mut().zip(buckets) {
        if b.is_empty() {
            continue;
        }
        b.sort_by(f64::total_cmp);
        let m = b.len() / 2;
        *h = Some(if b.len() % 2 == 1 {
            b[m]
        } else {
            0.5 * (b[m - 1] + b[m])
        });
    }
    if map.known_count() == 0 {
        log::warn!("build_elevation_map: no points inside the map extent");
    }
    map
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityMap {
    pub elevation: ElevationMap,
    pub safe: Vec<bool>,
    /// Slope of the fitted plane in radians; `None` where no plane could be fit.
    pub slope: Vec<Option<f64>>,
    pub normal: Vec<Option<Vector3<f64>>>,
}

impl TraversabilityMap {
    /// `None` for unknown cells and positions outside the map.
    pub fn safe_at(&self, x: f64, y: f64) -> Option<bool> {
        let (ix, iy) = self.elevation.cell_of(x, y)?;
        self.elevation.height(ix, iy)?;
        Some(self.safe[self.elevation.index(ix, iy)])
    }

    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self.elevation.height_at(x, y)
    }

    pub fn safe_count(&self) -> usize {
        self.safe.iter().filter(|s| **s).count()
    }

    /// Marks the known cells under a disc as safe. Used for the footprint the
    /// robot currently stands on, which is traversable whatever the classifier
    /// makes of its neighbourhood.
    pub fn assume_safe(&mut self, x: f64, y: f64, radius: f64) {
        let e = &self.elevation;
        let Some((cx, cy)) = e.cell_of(x, y) else { return };
        let reach = (radius / e.cell_size).ceil() as i64 + 1;
        for jy in cy as i64 - reach..=cy as i64 + reach {
            for jx in cx as i64 - reach..=cx as i64 + reach {
                if jx < 0 || jy < 0 || jx >= e.n as i64 || jy >= e.n as i64 {
                    continue;
                }
                let (jx, jy) = (jx as usize, jy as usize);
                let c = e.cell_center(jx, jy);
                let inside = (c[0] - x).hypot(c[1] - y) <= radius || (jx, jy) == (cx, cy);
                if inside && e.height(jx, jy).is_some() {
                    let i = e.index(jx, jy);
                    self.safe[i] = true;
                }
            }
        }
    }

    /// Bounds of the map in the horizontal plane: `(min_x, min_y, max_x, max_y)`.
    pub fn extent_box(&self) -> (f64, f64, f64, f64) {
        let o = self.elevation.origin();
        (o[0], o[1], o[0] + self.elevation.extent, o[1] + self.elevation.extent)
    }

    pub fn safe_csv(&self) -> String {
        let e = &self.elevation;
        let mut s = String::new();
        for iy in 0..e.n {
            let row: Vec<&str> = (0..e.n)
                .map(|ix| if self.safe[e.index(ix, iy)] { "1" } else { "0" })
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Least-squares plane `z = a x + b y + c` through the known cells of a 3×3
/// window. Returns the upward unit normal.
fn fit_normal(samples: &[(f64, f64, f64)]) -> Option<Vector3<f64>> {
    if samples.len() < 3 {
        return None;
    }
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(x, y, z) in samples {
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose();
        atb += row * z;
    }
    // collinear samples leave the system singular
    if ata.determinant().abs() < 1e-12 {
        return None;
    }
    let sol = ata.lu().solve(&atb)?;
    Some(Vector3::new(-sol.x, -sol.y, 1.0).normalize())
}

/// Classifies every cell. A cell is safe iff it is known, a plane can be fit to
/// its 3×3 neighbourhood with slope at most `slope_max` (radians), it has at
/// least one known neighbour, and no known neighbour differs in height by more
/// than `step_max`.
pub fn compute_traversability(elev: &ElevationMap, slope_max: f64, step_max: f64) -> TraversabilityMap {
    let n = elev.n;
    let mut safe = vec![false; n * n];
    let mut slope = vec![None; n * n];
    let mut normal = vec![None; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let Some(h) = elev.height(ix, iy) else { continue };
            let mut samples = Vec::with_capacity(9);
            let mut max_step: f64 = 0.0;
            let mut neighbors = 0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                        continue;
                    }
                    let Some(hn) = elev.height(jx as usize, jy as usize) else {
                        continue;
                    };
                    samples.push((dx as f64 * elev.cell_size, dy as f64 * elev.cell_size, hn));
                    if dx != 0 || dy != 0 {
                        neighbors += 1;
                        max_step = max_step.max((hn - h).abs());
                    }
                }
            }
            let i = elev.index(ix, iy);
            if let Some(nrm) = fit_normal(&samples) {
                let s = nrm.z.clamp(-1.0, 1.0).acos();
                slope[i] = Some(s);
                normal[i] = Some(nrm);
                safe[i] = neighbors > 0 && s <= slope_max && max_step <= step_max;
            }
        }
    }
    TraversabilityMap {
        elevation: elev.clone(),
        safe,
        slope,
        normal,
    }
}

/// True iff every cell whose centre lies within `footprint_radius` of the pose,
/// and the cell containing the pose, exists and is safe.
pub fn is_pose_valid(pose: &Pose, trav: &TraversabilityMap, footprint_radius: f64) -> bool {
    is_position_valid(pose.x(), pose.y(), trav, footprint_radius)
}

pub fn is_position_valid(x: f64, y: f64, trav: &TraversabilityMap, footprint_radius: f64) -> bool {
    let e = &trav.elevation;
    let Some((cx, cy)) = e.cell_of(x, y) else { return false };
    if !trav.safe[e.index(cx, cy)] {
        return false;
    }
    let o = e.origin();
    let r2 = footprint_radius * footprint_radius;
    let lo = |v: f64, o: f64| ((v - footprint_radius - o) / e.cell_size - 0.5).floor() as i64;
    let hi = |v: f64, o: f64| ((v + footprint_radius - o) / e.cell_size - 0.5).ceil() as i64;
    for jy in lo(y, o[1])..=hi(y, o[1]) {
        for jx in lo(x, o[0])..=hi(x, o[0]) {
            let cxw = o[0] + (jx as f64 + 0.5) * e.cell_size;
            let cyw = o[1] + (jy as f64 + 0.5) * e.cell_size;
            if (cxw - x).powi(2) + (cyw - y).powi(2) > r2 {
                continue;
            }
            if jx < 0 || jy < 0 || jx >= e.n as i64 || jy >= e.n as i64 {
                return false;
            }
            if !trav.safe[e.index(jx as usize, jy as usize)] {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(extent: f64, spacing: f64, height: impl Fn(f64, f64) -> f64) -> Vec<Point3<f64>> {
        let n = (extent / spacing).round() as i64;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = -extent / 2.0 + (i as f64 + 0.5) * spacing;
                let y = -extent / 2.0 + (j as f64 + 0.5) * spacing;
                pts.push(Point3::new(x, y, height(x, y)));
            }
        }
        pts
    }

    fn origin_pose() -> Pose {
        Pose::new(0.0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn flat_plane_is_known_and_safe() {
        let pts = grid_points(4.0, 0.05, |_, _| 0.0);
        let e = build_elevation_map(&pts, &origin_pose(), 4.0, 0.1);
        assert_eq!(e.n, 40);
        assert_eq!(e.known_count(), 1600);
        assert!(e.heights.iter().all(|h| h.unwrap().abs() < 1e-12));
        let t = compute_traversability(&e, 20f64.to_radians(), 0.15);
        assert_eq!(t.safe_count(), 1600);
        assert!(is_pose_valid(&origin_pose(), &t, 0.4));
    }

    #[test]
    fn no_points_gives_unknown_map() {
        let e = build_elevation_map(&[], &origin_pose(), 4.0, 0.1);
        assert_eq!(e.known_count(), 0);
        let t = compute_traversability(&e, 0.3, 0.15);
        assert_eq!(t.safe_count(), 0);
        assert!(!is_pose_valid(&origin_pose(), &t, 0.0));
    }

    #[test]
    fn median_rejects_outlier() {
        let pts = vec![
            Point3::new(0.05, 0.05, 0.0),
            Point3::new(0.05, 0.05, 0.01),
            Point3::new(0.05, 0.05, 5.0),
        ];
        let e = build_elevation_map(&pts, &origin_pose(), 1.0, 0.1);
        assert_eq!(e.height_at(0.05, 0.05), Some(0.01));
    }

    #[test]
    fn step_gives_two_plateaus() {
        let pts = grid_points(4.0, 0.05, |x, _| if x < 0.0 { 0.0 } else { 0.3 });
        let e = build_elevation_map(&pts, &origin_pose(), 4.0, 0.1);
        assert_eq!(e.height_at(-1.0, 0.0), Some(0.0));
        assert_eq!(e.height_at(1.0, 0.0), Some(0.3));
        let t = compute_traversability(&e, 20f64.to_radians(), 0.15);
        assert_eq!(t.safe_at(-0.05, 0.0), Some(false));
        assert_eq!(t.safe_at(0.05, 0.0), Some(false));
        assert_eq!(t.safe_at(-0.15, 0.0), Some(true));
        assert_eq!(t.safe_at(0.15, 0.0), Some(true));
    }

    #[test]
    fn steep_ramp_is_unsafe() {
        let tan60 = 60f64.to_radians().tan();
        let pts = grid_points(4.0, 0.05, |x, _| x * tan60);
        let e = build_elevation_map(&pts, &origin_pose(), 4.0, 0.1);
        let t = compute_traversability(&e, 20f64.to_radians(), 10.0);
        assert_eq!(t.safe_count(), 0);
        let s = t.slope[e.index(20, 20)].unwrap();
        assert!((s - 60f64.to_radians()).abs() < 1e-6);
    }

    #[test]
    fn isolated_cell_is_unsafe() {
        let e = build_elevation_map(&[Point3::new(0.05, 0.05, 0.0)], &origin_pose(), 1.0, 0.1);
        let t = compute_traversability(&e, 0.5, 0.15);
        assert_eq!(t.safe_at(0.05, 0.05), Some(false));
    }

    #[test]
    fn unknown_footprint_cell_invalidates_pose() {
        let mut pts = grid_points(4.0, 0.05, |_, _| 0.0);
        pts.retain(|p| !(p.x > 0.2 && p.x < 0.3 && p.y > 0.0 && p.y < 0.1));
        let e = build_elevation_map(&pts, &origin_pose(), 4.0, 0.1);
        let t = compute_traversability(&e, 20f64.to_radians(), 0.15);
        assert!(is_pose_valid(&Pose::new(-1.0, 0.0, 0.0, 0.0), &t, 0.4));
        assert!(!is_pose_valid(&Pose::new(0.0, 0.0, 0.0, 0.0), &t, 0.4));
    }

    #[test]
    fn assumed_footprint_becomes_valid() {
        let pts = grid_points(4.0, 0.05, |x, _| if x < 0.0 { 0.0 } else { 0.3 });
        let e = build_elevation_map(&pts, &origin_pose(), 4.0, 0.1);
        let mut t = compute_traversability(&e, 20f64.to_radians(), 0.15);
        assert!(!is_pose_valid(&origin_pose(), &t, 0.4));
        t.assume_safe(0.0, 0.0, 0.4);
        assert!(is_pose_valid(&origin_pose(), &t, 0.4));
        assert!(!is_pose_valid(&Pose::new(0.0, 0.3, 0.0, 0.0), &t, 0.4));
    }

    #[test]
    fn csv_exports_have_grid_shape() {
        let pts = grid_points(1.0, 0.05, |_, _| 0.0);
        let e = build_elevation_map(&pts, &origin_pose(), 1.0, 0.1);
        let t = compute_traversability(&e, 0.3, 0.15);
        assert_eq!(e.heights_csv().lines().count(), 10);
        assert_eq!(t.safe_csv().lines().next().unwrap().split(',').count(), 10);
    }
}
