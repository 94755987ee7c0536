//! Exact nearest-neighbor queries over 3D point sets.

use crate::Vec3;

/// A median-split KD-tree over 3D points. Queries return the exact nearest
/// neighbor (ties resolved toward the lowest input index), so results are
/// interchangeable with a brute-force scan.
#[derive(Debug, Clone)]
pub struct KdTree3 {
    nodes: Vec<Node>,
    points: Vec<Vec3>,
    root: usize,
}

#[derive(Debug, Clone)]
struct Node {
    point_ix: u32,
    axis: u8,
    left: u32,
    right: u32,
}

const NIL: u32 = u32::MAX;

impl KdTree3 {
    /// Builds a tree. Panics on an empty slice.
    pub fn build(points: &[Vec3]) -> Self {
        assert!(!points.is_empty(), "KdTree3 needs at least one point");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_recursive(points, &mut order, 0, &mut nodes);
        Self {
            nodes,
            points: points.to_vec(),
            root: root as usize,
        }
    }

    /// Index and squared distance of the nearest stored point to `query`.
    pub fn nearest(&self, query: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root as u32, query, &mut best);
        best
    }

    /// Euclidean distance from `query` to the nearest stored point.
    pub fn nearest_distance(&self, query: &Vec3) -> f64 {
        self.nearest(query).1.sqrt()
    }

    fn search(&self, node_ix: u32, query: &Vec3, best: &mut (usize, f64)) {
        if node_ix == NIL {
            return;
        }
        let node = &self.nodes[node_ix as usize];
        let p = &self.points[node.point_ix as usize];
        let d2 = (query - p).norm_squared();
        // Strict improvement, or equal distance with a lower index: keeps
        // results identical to a first-match brute-force scan.
        if d2 < best.1 || (d2 == best.1 && (node.point_ix as usize) < best.0) {
            *best = (node.point_ix as usize, d2);
        }
        let axis = node.axis as usize;
        let delta = query[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, query, best);
        if delta * delta <= best.1 {
            self.search(far, query, best);
        }
    }
}

fn build_recursive(points: &[Vec3], order: &mut [u32], depth: usize, nodes: &mut Vec<Node>) -> u32 {
    if order.is_empty() {
        return NIL;
    }
    let axis = depth % 3;
    // Sort by (coordinate, index) for a fully deterministic structure.
    order.sort_unstable_by(|&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .expect("NaN coordinate in KdTree3")
            .then(a.cmp(&b))
    });
    let mid = order.len() / 2;
    let point_ix = order[mid];
    let (left_slice, rest) = order.split_at_mut(mid);
    let right_slice = &mut rest[1..];
    let left = build_recursive(points, left_slice, depth + 1, nodes);
    let right = build_recursive(points, right_slice, depth + 1, nodes);
    nodes.push(Node {
        point_ix,
        axis: axis as u8,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}
