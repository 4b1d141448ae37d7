//! Nearest-neighbour index over 3D points, backed by a k-d tree.

use std::num::NonZeroUsize;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Point3;

pub struct PointIndex {
    tree: Option<ImmutableKdTree<f64, 3>>,
    len: usize,
}

impl PointIndex {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let entries: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = if entries.is_empty() {
            None
        } else {
            Some(ImmutableKdTree::new_from_slice(&entries).expect("finite points"))
        };
        Self {
            tree,
            len: points.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Euclidean distance to the nearest indexed point.
    pub fn nearest_distance(&self, p: &Point3<f64>) -> Option<f64> {
        let tree = self.tree.as_ref()?;
        let hit = tree
            .query(&[p.x, p.y, p.z])
            .nearest_one::<SquaredEuclidean<f64>>()
            .execute();
        Some(hit.distance.sqrt())
    }

    /// Distances to the `k` nearest indexed points, ascending. Includes the query
    /// point itself when it is indexed.
    pub fn knn_distances(&self, p: &Point3<f64>, k: usize) -> Vec<f64> {
        let (Some(tree), Some(k)) = (self.tree.as_ref(), NonZeroUsize::new(k)) else {
            return Vec::new();
        };
        tree.query(&[p.x, p.y, p.z])
            .nearest_n::<SquaredEuclidean<f64>>(k)
            .execute()
            .into_iter()
            .map(|r| r.distance.sqrt())
            .collect()
    }
}
