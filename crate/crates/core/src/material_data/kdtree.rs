//! Exact k-d tree over a flat point buffer.
//!
//! All queries order candidates by `(squared distance, index)`, so ties
//! resolve to the lowest index and results agree bit-for-bit with an
//! exhaustive scan using the same distance arithmetic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

/// Above this dimension the tree degenerates to a single leaf (linear scan).
pub const MAX_TREE_DIM: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    /// Builds a tree over `coords`, a row-major `n × dim` buffer.
    pub fn build(coords: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        let n = coords.len() / dim;
        let mut tree = Self {
            dim,
            coords,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            if dim > MAX_TREE_DIM {
                tree.nodes.push(Node::Leaf { start: 0, end: n });
            } else {
                tree.build_node(0, n);
            }
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of widest spread
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..self.dim {
            let (lo, hi) = self.order[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &i| {
                    let v = self.coords[i * self.dim + a];
                    (lo.min(v), hi.max(v))
                },
            );
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (dim, coords) = (self.dim, &self.coords);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis].total_cmp(&coords[b * dim + axis])
        });
        let value = coords[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Nearest point to `query`, ties broken by lowest index.
    pub fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        if self.is_empty() {
            return None;
        }
        let mut best = Neighbor {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        self.nearest_in(0, query, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: usize, q: &[f64], best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist_sq: squared_distance(self.point(i), q),
                    };
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                if diff * diff <= best.dist_sq {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points to `query`, skipping `exclude`, ascending.
    pub fn k_nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.k_nearest_in(0, query, k, exclude, &mut heap);
        heap.into_sorted_vec()
    }

    fn k_nearest_in(
        &self,
        node: usize,
        q: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Neighbor {
                        index: i,
                        dist_sq: squared_distance(self.point(i), q),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.k_nearest_in(near, q, k, exclude, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().map_or(f64::INFINITY, |n| n.dist_sq)
                };
                if diff * diff <= worst {
                    self.k_nearest_in(far, q, k, exclude, heap);
                }
            }
        }
    }

    /// Indices of all points with squared distance `<= radius_sq`, ascending by index.
    pub fn within(&self, query: &[f64], radius_sq: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if !self.is_empty() {
            self.within_in(0, query, radius_sq, &mut out);
        }
        out.sort_unstable_by_key(|n| n.index);
        out
    }

    fn within_in(&self, node: usize, q: &[f64], radius_sq: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = squared_distance(self.point(i), q);
                    if d <= radius_sq {
                        out.push(Neighbor {
                            index: i,
                            dist_sq: d,
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff < 0.0 || diff * diff <= radius_sq {
                    self.within_in(left, q, radius_sq, out);
                }
                if diff >= 0.0 || diff * diff <= radius_sq {
                    self.within_in(right, q, radius_sq, out);
                }
            }
        }
    }
}
