//! Static 3-d tree over a point set.
//!
//! Distances are compared as squared Euclidean values computed by
//! [`Vec3::distance_squared`], so nearest-neighbour results agree bit for bit
//! with a brute-force scan. Ties are broken by the lowest point index.

use crate::geom::Vec3;
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum KdNode<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<T> {
    points: Vec<Vec3<T>>,
    order: Vec<usize>,
    nodes: Vec<KdNode<T>>,
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[Vec3<T>]) -> Self {
        let mut tree = KdTree { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_rec(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_rec(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let mut lo = self.points[self.order[start]];
        let mut hi = lo;
        for &i in &self.order[start..end] {
            lo = lo.component_min(&self.points[i]);
            hi = hi.component_max(&self.points[i]);
        }
        let ext = hi - lo;
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
            0
        } else if ext[1] >= ext[2] {
            1
        } else {
            2
        };
        let pts = &self.points;
        self.order[start..end].sort_by(|&a, &b| {
            pts[a][axis].partial_cmp(&pts[b][axis]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mid = start + (end - start) / 2;
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(KdNode::Leaf { start: 0, end: 0 });
        let left = self.build_rec(start, mid);
        let right = self.build_rec(mid, end);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, q: &Vec3<T>) -> Option<(usize, T)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, T::infinity());
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: usize, q: &Vec3<T>, best: &mut (usize, T)) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = q.distance_squared(&self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                // Equal plane distance may still hide an equal-distance point with a lower index.
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// Indices of all points with distance strictly below `radius`, ascending.
    pub fn within_radius(&self, q: &Vec3<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_rec(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, q: &Vec3<T>, r2: T, out: &mut Vec<usize>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if q.distance_squared(&self.points[i]) < r2 {
                        out.push(i);
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, out);
                if diff * diff < r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }
}
