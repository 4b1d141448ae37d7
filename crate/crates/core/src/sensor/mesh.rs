//! Triangle scene, Wavefront OBJ loading, and a bounding-volume hierarchy for
//! nearest-hit ray queries.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Aabb;

const LEAF_SIZE: usize = 4;
const DEGENERATE_AREA: f64 = 1e-14;
const HIT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Bvh {
    nodes: Vec<Node>,
    /// Triangle ids permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
}

impl Bvh {
    fn build(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> Self {
        let mut order: Vec<usize> = (0..triangles.len())
            .filter(|&t| triangle_area(vertices, &triangles[t]) > DEGENERATE_AREA)
            .collect();
        let centroids: Vec<Point3<f64>> = triangles
            .iter()
            .map(|t| Point3::from((vertices[t[0]].coords + vertices[t[1]].coords + vertices[t[2]].coords) / 3.0))
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::new(),
            order: Vec::new(),
        };
        if !order.is_empty() {
            let n = order.len();
            bvh.build_range(vertices, triangles, &centroids, &mut order, 0, n);
        }
        bvh.order = order;
        bvh
    }

    fn build_range(
        &mut self,
        vertices: &[Point3<f64>],
        triangles: &[[usize; 3]],
        centroids: &[Point3<f64>],
        order: &mut [usize],
        start: usize,
        end: usize,
    ) -> usize {
        let slice = &mut order[start..end];
        let mut bounds = Aabb::empty();
        let mut centroid_bounds = Aabb::empty();
        for &t in slice.iter() {
            for &v in &triangles[t] {
                bounds.grow(&vertices[v]);
            }
            centroid_bounds.grow(&centroids[t]);
        }
        let index = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return index;
        }
        let axis = centroid_bounds.longest_axis();
        let mid = (end - start) / 2;
        slice.select_nth_unstable_by(mid, |a, b| centroids[*a][axis].total_cmp(&centroids[*b][axis]));
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build_range(vertices, triangles, centroids, order, start, start + mid);
        let right = self.build_range(vertices, triangles, centroids, order, start + mid, end);
        self.nodes[index] = Node::Inner { bounds, left, right };
        index
    }
}

fn triangle_area(vertices: &[Point3<f64>], t: &[usize; 3]) -> f64 {
    let a = vertices[t[1]] - vertices[t[0]];
    let b = vertices[t[2]] - vertices[t[0]];
    0.5 * a.cross(&b).norm()
}

/// Möller-Trumbore. Returns the ray parameter of the hit, if any.
pub fn intersect_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > HIT_EPSILON).then_some(t)
}

/// Ground-truth scene: a triangle soup plus the box marking the object of interest.
#[derive(Debug, Clone)]
pub struct SceneMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    object_bbox: Aabb,
    bvh: Bvh,
}

impl SceneMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>, object_bbox: Aabb) -> Result<Self> {
        if let Some(bad) = triangles.iter().flatten().find(|&&i| i >= vertices.len()) {
            return Err(Error::invalid(
                "triangles",
                format!("vertex index {bad} out of range ({} vertices)", vertices.len()),
            ));
        }
        if !object_bbox.is_non_degenerate() {
            return Err(Error::invalid("object_bbox", "degenerate box"));
        }
        let bvh = Bvh::build(&vertices, &triangles);
        Ok(Self {
            vertices,
            triangles,
            object_bbox,
            bvh,
        })
    }

    /// Loads a Wavefront OBJ file, triangulating polygons. All models in the file
    /// are merged into one scene.
    pub fn load_obj(path: &Path, object_bbox: Aabb) -> Result<Self> {
        let options = tobj::LoadOptions {
            triangulate: true,
            single_index: true,
            ..Default::default()
        };
        let (models, _) = tobj::load_obj(path, &options).map_err(|source| Error::Mesh {
            path: path.to_path_buf(),
            source,
        })?;
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for model in models {
            let base = vertices.len();
            let m = model.mesh;
            vertices.extend(
                m.positions
                    .chunks_exact(3)
                    .map(|p| Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)),
            );
            triangles.extend(
                m.indices
                    .chunks_exact(3)
                    .map(|t| [base + t[0] as usize, base + t[1] as usize, base + t[2] as usize]),
            );
        }
        Self::new(vertices, triangles, object_bbox)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn object_bbox(&self) -> &Aabb {
        &self.object_bbox
    }

    pub fn is_empty(&self) -> bool {
        self.bvh.order.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unit normal following the winding order (counter-clockwise faces outward).
    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area(&self.vertices, &self.triangles[t])
    }

    /// Triangles lying entirely inside the (slightly padded) object box.
    pub fn object_triangles(&self) -> Vec<usize> {
        let padded = self.object_bbox.inflate(1e-6);
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].iter().all(|&v| padded.contains(&self.vertices[v])))
            .collect()
    }

    /// Nearest intersection with positive distance, within `max_distance`.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>, max_distance: f64) -> Option<RayHit> {
        if self.bvh.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<RayHit> = None;
        let mut limit = max_distance;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.bvh.nodes[n];
            if node.bounds().ray_interval(origin, &inv, limit).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.bvh.order[start..end] {
                        let [a, b, c] = self.triangle(t);
                        if let Some(d) = intersect_triangle(origin, dir, &a, &b, &c) {
                            if d <= limit && best.is_none_or(|h| d < h.distance || (d == h.distance && t < h.triangle))
                            {
                                best = Some(RayHit {
                                    distance: d,
                                    triangle: t,
                                });
                                limit = d;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }
}

/// Nearest positive-distance hit of a unit-direction ray against the scene.
pub fn ray_mesh_intersect(origin: &Point3<f64>, direction: &Vector3<f64>, scene: &SceneMesh) -> Option<RayHit> {
    scene.intersect(origin, direction, f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_at_z(z: f64) -> SceneMesh {
        let v = vec![
            Point3::new(0.0, 0.0, z),
            Point3::new(1.0, 0.0, z),
            Point3::new(1.0, 1.0, z),
            Point3::new(0.0, 1.0, z),
        ];
        let bbox = Aabb::new(Point3::new(0.0, 0.0, z - 0.1), Point3::new(1.0, 1.0, z + 0.1));
        SceneMesh::new(v, vec![[0, 1, 2], [0, 2, 3]], bbox).unwrap()
    }

    #[test]
    fn perpendicular_ray_hits_square() {
        let s = unit_square_at_z(2.0);
        let h = ray_mesh_intersect(&Point3::new(0.3, 0.6, 0.0), &Vector3::z(), &s).unwrap();
        assert!((h.distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_ray_misses() {
        let s = unit_square_at_z(2.0);
        assert!(ray_mesh_intersect(&Point3::new(-1.0, 0.5, 2.0), &Vector3::x(), &s).is_none());
        assert!(ray_mesh_intersect(&Point3::new(0.5, 0.5, 3.0), &Vector3::z(), &s).is_none());
    }

    #[test]
    fn degenerate_triangles_are_skipped() {
        let v = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(2.0, 0.0, 1.0),
        ];
        let bbox = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let s = SceneMesh::new(v, vec![[0, 1, 2]], bbox).unwrap();
        assert!(s.is_empty());
        assert!(ray_mesh_intersect(&Point3::new(1.0, 0.0, 0.0), &Vector3::z(), &s).is_none());
    }

    #[test]
    fn bad_indices_rejected() {
        let bbox = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        assert!(SceneMesh::new(vec![Point3::origin()], vec![[0, 1, 2]], bbox).is_err());
    }

    #[test]
    fn obj_round_trip() {
        let s = unit_square_at_z(0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.obj");
        std::fs::write(&path, s.to_obj_string()).unwrap();
        let back = SceneMesh::load_obj(&path, *s.object_bbox()).unwrap();
        assert_eq!(back.triangles().len(), 2);
        assert_eq!(back.vertices().len(), 4);
    }
}
