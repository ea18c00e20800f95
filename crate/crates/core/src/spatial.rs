//! Exact k-d tree over a fixed point set.
//!
//! Queries are exact (no approximate nearest neighbor): results must equal a
//! linear scan, with nearest-neighbor ties broken by the lowest point index.

use nalgebra::DVector;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct Node {
    /// Index into the point set.
    point: usize,
    /// Splitting axis at this node.
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Space-partitioning index over points of a common dimension.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct KdTree {
    points: Vec<DVector<f64>>,
    nodes: Vec<Node>,
    root: Option<usize>,
    dim: usize,
}

impl KdTree {
    /// Build a balanced tree by recursive median split (axis cycles with depth).
    pub fn build(points: Vec<DVector<f64>>) -> Self {
        let dim = points.first().map_or(0, |p| p.len());
        debug_assert!(points.iter().all(|p| p.len() == dim));
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(&points, &mut indices[..], 0, dim, &mut nodes);
        Self {
            points,
            nodes,
            root,
            dim,
        }
    }

    fn build_rec(
        points: &[DVector<f64>],
        indices: &mut [usize],
        depth: usize,
        dim: usize,
        nodes: &mut Vec<Node>,
    ) -> Option<usize> {
        if indices.is_empty() {
            return None;
        }
        let axis = if dim == 0 { 0 } else { depth % dim };
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .expect("non-finite coordinate in kd-tree")
                .then(a.cmp(&b))
        });
        let point = indices[mid];
        let (lo, rest) = indices.split_at_mut(mid);
        let hi = &mut rest[1..];
        let node_id = nodes.len();
        nodes.push(Node {
            point,
            axis,
            left: None,
            right: None,
        });
        let left = Self::build_rec(points, lo, depth + 1, dim, nodes);
        let right = Self::build_rec(points, hi, depth + 1, dim, nodes);
        nodes[node_id].left = left;
        nodes[node_id].right = right;
        Some(node_id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &DVector<f64> {
        &self.points[index]
    }

    /// Index of the nearest point to `query`; ties go to the lowest index.
    pub fn nearest(&self, query: &DVector<f64>) -> Option<usize> {
        let root = self.root?;
        let mut best: Option<(f64, usize)> = None;
        self.nearest_rec(root, query, &mut best);
        best.map(|(_, i)| i)
    }

    fn nearest_rec(&self, node_id: usize, query: &DVector<f64>, best: &mut Option<(f64, usize)>) {
        let node = &self.nodes[node_id];
        let d = (&self.points[node.point] - query).norm();
        let better = match *best {
            None => true,
            Some((bd, bi)) => d < bd || (d == bd && node.point < bi),
        };
        if better {
            *best = Some((d, node.point));
        }
        let delta = query[node.axis] - self.points[node.point][node.axis];
        let (near, far) = if delta <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.nearest_rec(n, query, best);
        }
        // The far half-space can still hold an equal-distance lower index,
        // so descend on <= rather than <.
        if let Some(f) = far {
            if best.is_none_or(|(bd, _)| delta.abs() <= bd) {
                self.nearest_rec(f, query, best);
            }
        }
    }

    /// Indices of all points within closed Euclidean distance `radius` of `query`.
    pub fn within(&self, query: &DVector<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(root) = self.root {
            self.within_rec(root, query, radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, node_id: usize, query: &DVector<f64>, radius: f64, out: &mut Vec<usize>) {
        let node = &self.nodes[node_id];
        if (&self.points[node.point] - query).norm() <= radius {
            out.push(node.point);
        }
        let delta = query[node.axis] - self.points[node.point][node.axis];
        if let Some(l) = node.left {
            if delta <= radius {
                self.within_rec(l, query, radius, out);
            }
        }
        if let Some(r) = node.right {
            if -delta <= radius {
                self.within_rec(r, query, radius, out);
            }
        }
    }

    /// True if any point lies within closed distance `radius` of `query`.
    pub fn any_within(&self, query: &DVector<f64>, radius: f64) -> bool {
        self.root
            .map(|root| self.any_within_rec(root, query, radius))
            .unwrap_or(false)
    }

    fn any_within_rec(&self, node_id: usize, query: &DVector<f64>, radius: f64) -> bool {
        let node = &self.nodes[node_id];
        if (&self.points[node.point] - query).norm() <= radius {
            return true;
        }
        let delta = query[node.axis] - self.points[node.point][node.axis];
        if let Some(l) = node.left {
            if delta <= radius && self.any_within_rec(l, query, radius) {
                return true;
            }
        }
        if let Some(r) = node.right {
            if -delta <= radius && self.any_within_rec(r, query, radius) {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn linear_nearest(points: &[DVector<f64>], q: &DVector<f64>) -> Option<usize> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm(), i))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .map(|(_, i)| i)
    }

    #[test]
    fn nearest_matches_linear_scan() {
        for dim in [1usize, 2, 3, 8] {
            let points = random_points(200, dim, 7 + dim as u64);
            let tree = KdTree::build(points.clone());
            for qi in 0..300 {
                let q = random_points(1, dim, 1000 + qi)[0].clone();
                assert_eq!(tree.nearest(&q), linear_nearest(&points, &q));
            }
        }
    }

    #[test]
    fn within_matches_linear_scan() {
        let points = random_points(300, 3, 42);
        let tree = KdTree::build(points.clone());
        for qi in 0..200 {
            let q = random_points(1, 3, 2000 + qi)[0].clone();
            let r = 0.3;
            let mut expect: Vec<usize> = points
                .iter()
                .enumerate()
                .filter(|(_, p)| (*p - &q).norm() <= r)
                .map(|(i, _)| i)
                .collect();
            expect.sort_unstable();
            assert_eq!(tree.within(&q, r), expect);
            assert_eq!(tree.any_within(&q, r), !expect.is_empty());
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        // Two points equidistant from the query.
        let points = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0]),
            DVector::from_vec(vec![0.0, 5.0]),
        ];
        let tree = KdTree::build(points);
        let q = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(tree.nearest(&q), Some(0));
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::build(Vec::new());
        let q = DVector::from_vec(vec![0.0]);
        assert_eq!(tree.nearest(&q), None);
        assert!(tree.within(&q, 10.0).is_empty());
        assert!(!tree.any_within(&q, 10.0));
    }

    #[test]
    fn query_on_a_stored_point() {
        let points = random_points(50, 2, 9);
        let tree = KdTree::build(points.clone());
        for (i, p) in points.iter().enumerate() {
            let n = tree.nearest(p).unwrap();
            // Distance must be zero; duplicates may resolve to a lower index.
            assert!((points[n].clone() - p).norm() == 0.0);
            assert!(n <= i);
        }
    }
}
