//! Synthetic scenes: a box, a facade-like wall behind a hazard strip, and a
//! helicopter-like hull on a skirt. Every scene sits on a large ground plane.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Pose};
use crate::sensor::SceneMesh;

const GROUND_HALF_SIZE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundledScene {
    Box,
    Wall,
    Helicopter,
}

impl BundledScene {
    pub const ALL: [BundledScene; 3] = [BundledScene::Box, BundledScene::Wall, BundledScene::Helicopter];

    pub fn as_str(&self) -> &'static str {
        match self {
            BundledScene::Box => "box",
            BundledScene::Wall => "wall",
            BundledScene::Helicopter => "helicopter",
        }
    }

    pub fn build(&self) -> Scene {
        match self {
            BundledScene::Box => box_scene(),
            BundledScene::Wall => wall_scene(),
            BundledScene::Helicopter => helicopter_scene(),
        }
    }
}

impl fmt::Display for BundledScene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BundledScene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::parse("scene name", format!("unknown scene `{s}`")))
    }
}

/// A scene with a suggested start pose and map margin.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: SceneMesh,
    pub start: Pose,
    pub margin: f64,
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
}

impl MeshBuilder {
    fn vertex(&mut self, x: f64, y: f64, z: f64) -> usize {
        self.vertices.push(Point3::new(x, y, z));
        self.vertices.len() - 1
    }

    fn ground(&mut self) {
        let h = GROUND_HALF_SIZE;
        let a = self.vertex(-h, -h, 0.0);
        let b = self.vertex(h, -h, 0.0);
        let c = self.vertex(h, h, 0.0);
        let d = self.vertex(-h, h, 0.0);
        self.triangles.extend([[a, b, c], [a, c, d]]);
    }

    /// Side walls between `z0` and `z1` of a counter-clockwise polygon, outward
    /// facing. No caps.
    fn walls(&mut self, poly: &[[f64; 2]], z0: f64, z1: f64) {
        let n = poly.len();
        for i in 0..n {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            let a0 = self.vertex(p[0], p[1], z0);
            let b0 = self.vertex(q[0], q[1], z0);
            let b1 = self.vertex(q[0], q[1], z1);
            let a1 = self.vertex(p[0], p[1], z1);
            self.triangles.extend([[a0, b0, b1], [a0, b1, a1]]);
        }
    }

    /// Upward-facing fan over a convex counter-clockwise polygon.
    fn cap(&mut self, poly: &[[f64; 2]], z: f64) {
        let n = poly.len() as f64;
        let cx = poly.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = poly.iter().map(|p| p[1]).sum::<f64>() / n;
        let c = self.vertex(cx, cy, z);
        let ids: Vec<usize> = poly.iter().map(|p| self.vertex(p[0], p[1], z)).collect();
        for i in 0..ids.len() {
            self.triangles.push([c, ids[i], ids[(i + 1) % ids.len()]]);
        }
    }

    /// Upward-facing ring between two polygons with matching vertex order.
    fn ring(&mut self, outer: &[[f64; 2]], inner: &[[f64; 2]], z: f64) {
        let n = outer.len();
        for i in 0..n {
            let j = (i + 1) % n;
            let o0 = self.vertex(outer[i][0], outer[i][1], z);
            let o1 = self.vertex(outer[j][0], outer[j][1], z);
            let i1 = self.vertex(inner[j][0], inner[j][1], z);
            let i0 = self.vertex(inner[i][0], inner[i][1], z);
            self.triangles.extend([[o0, o1, i1], [o0, i1, i0]]);
        }
    }

    fn prism(&mut self, poly: &[[f64; 2]], z0: f64, z1: f64) {
        self.walls(poly, z0, z1);
        self.cap(poly, z1);
    }

    fn finish(self, object_bbox: Aabb) -> SceneMesh {
        SceneMesh::new(self.vertices, self.triangles, object_bbox).expect("valid synthetic mesh")
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> [[f64; 2]; 4] {
    [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

/// Counter-clockwise stadium: straight sides of `length - 2r` along x, round
/// ends of radius `r`.
fn stadium(length: f64, r: f64, segments: usize) -> Vec<[f64; 2]> {
    let half = length / 2.0 - r;
    let mut poly = Vec::with_capacity(2 * (segments + 1));
    for i in 0..=segments {
        let a = -FRAC_PI_2 + PI * i as f64 / segments as f64;
        poly.push([half + r * a.cos(), r * a.sin()]);
    }
    for i in 0..=segments {
        let a = FRAC_PI_2 + PI * i as f64 / segments as f64;
        poly.push([-half + r * a.cos(), r * a.sin()]);
    }
    poly
}

/// 4 × 2 × 1.6 m box centred on the origin.
pub fn box_scene() -> Scene {
    let mut m = MeshBuilder::default();
    m.ground();
    m.prism(&rect(-2.0, -1.0, 2.0, 1.0), 0.0, 1.6);
    let bbox = Aabb::new(Point3::new(-2.0, -1.0, 0.0), Point3::new(2.0, 1.0, 1.6));
    Scene {
        mesh: m.finish(bbox),
        start: Pose::new(0.0, -2.8, 0.0, FRAC_PI_2),
        margin: 2.0,
    }
}

/// 10 m long, 3 m tall, 0.3 m thick wall with a 0.3 m high hazard strip running
/// in front of it.
pub fn wall_scene() -> Scene {
    let mut m = MeshBuilder::default();
    m.ground();
    m.prism(&rect(-5.0, -0.15, 5.0, 0.15), 0.0, 3.0);
    m.prism(&rect(-4.0, -1.55, 4.0, -1.15), 0.0, 0.3);
    let bbox = Aabb::new(Point3::new(-5.0, -0.15, 0.0), Point3::new(5.0, 0.15, 3.0));
    Scene {
        mesh: m.finish(bbox),
        start: Pose::new(0.0, -2.6, 0.0, FRAC_PI_2),
        margin: 3.0,
    }
}

/// 8 m long, 2.4 m wide, 3 m tall stadium hull on a 0.2 m skirt that sticks out
/// 0.3 m all around.
pub fn helicopter_scene() -> Scene {
    let mut m = MeshBuilder::default();
    m.ground();
    let segments = 12;
    let hull = stadium(8.0, 1.2, segments);
    let skirt = stadium(8.6, 1.5, segments);
    m.walls(&skirt, 0.0, 0.2);
    m.ring(&skirt, &hull, 0.2);
    m.prism(&hull, 0.2, 3.0);
    let bbox = Aabb::new(Point3::new(-4.3, -1.5, 0.0), Point3::new(4.3, 1.5, 3.0));
    Scene {
        mesh: m.finish(bbox),
        start: Pose::new(0.0, -3.2, 0.0, FRAC_PI_2),
        margin: 2.5,
    }
}
