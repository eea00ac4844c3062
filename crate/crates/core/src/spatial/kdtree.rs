//! Exact 2-D KD-tree with median splits.
//!
//! Each internal node splits its points on the axis with the larger coordinate
//! spread at the median value: points strictly below the threshold go left,
//! points at or above it go right. Leaves hold a contiguous run of the
//! permuted index array.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::points::{euclidean, PointSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn other(self) -> Self {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: Axis,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Neighbor of a query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Neighbors sorted by nondecreasing distance, ties by lower index.
pub type NeighborList = Vec<Neighbor>;

/// Work counters for a single query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub visited_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    xs: Vec<f64>,
    ys: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

// Max-heap entry keyed on (distance, index).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    distance: f64,
    index: usize,
}

impl Candidate {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

impl KdTree {
    /// Builds a tree with one point per leaf.
    pub fn build(points: &PointSet) -> Result<Self> {
        Self::with_leaf_size(points, 1)
    }

    /// Builds a tree whose leaves hold at most `leaf_size` points (more only
    /// when every remaining point shares the same location).
    pub fn with_leaf_size(points: &PointSet, leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let leaf_size = leaf_size.max(1);
        let n = points.len();
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.points().iter().map(|p| (p.x, p.y)).unzip();
        let mut tree = KdTree {
            xs,
            ys,
            order: (0..n).collect(),
            nodes: Vec::with_capacity(2 * n),
            leaf_size,
        };
        tree.build_node(0, n, 0);
        Ok(tree)
    }

    fn coord(&self, axis: Axis, id: usize) -> f64 {
        match axis {
            Axis::X => self.xs[id],
            Axis::Y => self.ys[id],
        }
    }

    fn spread(&self, axis: Axis, ids: &[usize]) -> f64 {
        let (lo, hi) = ids
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.coord(axis, i);
                (lo.min(v), hi.max(v))
            });
        hi - lo
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= self.leaf_size {
            return slot;
        }
        let preferred = if depth.is_multiple_of(2) {
            Axis::X
        } else {
            Axis::Y
        };
        let ids = &self.order[start..end];
        let (sx, sy) = (self.spread(Axis::X, ids), self.spread(Axis::Y, ids));
        let first = match sx.total_cmp(&sy) {
            Ordering::Greater => Axis::X,
            Ordering::Less => Axis::Y,
            Ordering::Equal => preferred,
        };
        for axis in [first, first.other()] {
            if let Some((threshold, mid)) = self.partition(axis, start, end) {
                let left = self.build_node(start, start + mid, depth + 1);
                let right = self.build_node(start + mid, end, depth + 1);
                self.nodes[slot] = Node::Split {
                    axis,
                    threshold,
                    left,
                    right,
                };
                return slot;
            }
        }
        // Every point in this node sits at one location.
        slot
    }

    /// Sorts the run by `(coord, id)` and returns the median threshold plus
    /// the size of the left part, or `None` if the axis cannot separate it.
    fn partition(&mut self, axis: Axis, start: usize, end: usize) -> Option<(f64, usize)> {
        let (xs, ys) = (&self.xs, &self.ys);
        let key = |i: usize| match axis {
            Axis::X => xs[i],
            Axis::Y => ys[i],
        };
        let run = &mut self.order[start..end];
        run.sort_unstable_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let len = run.len();
        let median = key(run[len / 2]);
        let mut mid = run.partition_point(|&i| key(i) < median);
        let mut threshold = median;
        if mid == 0 {
            // Median equals the minimum: move the threshold to the next distinct value.
            mid = run.partition_point(|&i| key(i) <= median);
            if mid == len {
                return None;
            }
            threshold = key(run[mid]);
        }
        Some((threshold, mid))
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Point indices of each leaf, left to right.
    pub fn leaves(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => out.push(self.order[start..end].to_vec()),
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Number of levels (a single leaf has depth 1).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks the split invariant on every internal node.
    pub fn splits_are_consistent(&self) -> bool {
        fn collect(tree: &KdTree, i: usize, out: &mut Vec<usize>) {
            match tree.nodes[i] {
                Node::Leaf { start, end } => out.extend_from_slice(&tree.order[start..end]),
                Node::Split { left, right, .. } => {
                    collect(tree, left, out);
                    collect(tree, right, out);
                }
            }
        }
        self.nodes.iter().all(|node| match *node {
            Node::Leaf { .. } => true,
            Node::Split {
                axis,
                threshold,
                left,
                right,
            } => {
                let (mut l, mut r) = (Vec::new(), Vec::new());
                collect(self, left, &mut l);
                collect(self, right, &mut r);
                l.iter().all(|&i| self.coord(axis, i) < threshold)
                    && r.iter().all(|&i| self.coord(axis, i) >= threshold)
            }
        })
    }

    fn check_query(&self, query: usize, radius: f64) -> Result<()> {
        if query >= self.len() {
            return Err(Error::IndexError {
                index: query,
                n: self.len(),
            });
        }
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(())
    }

    /// The `k` nearest points to point `query` (itself excluded) at distance
    /// `<= radius`. Pass `f64::INFINITY` for an unbounded search.
    pub fn nearest_neighbors(&self, query: usize, k: usize, radius: f64) -> Result<NeighborList> {
        self.nearest_neighbors_with_stats(query, k, radius)
            .map(|(list, _)| list)
    }

    pub fn nearest_neighbors_with_stats(
        &self,
        query: usize,
        k: usize,
        radius: f64,
    ) -> Result<(NeighborList, QueryStats)> {
        self.check_query(query, radius)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut stats = QueryStats::default();
        let q = (self.xs[query], self.ys[query]);
        self.knn_node(0, q, query, k, radius, &mut heap, &mut stats);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        Ok((
            out.into_iter()
                .map(|c| Neighbor {
                    index: c.index,
                    distance: c.distance,
                })
                .collect(),
            stats,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn knn_node(
        &self,
        node: usize,
        q: (f64, f64),
        exclude: usize,
        k: usize,
        radius: f64,
        heap: &mut BinaryHeap<Candidate>,
        stats: &mut QueryStats,
    ) {
        stats.visited_nodes += 1;
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == exclude {
                        continue;
                    }
                    let cand = Candidate {
                        distance: euclidean(q.0, q.1, self.xs[i], self.ys[i]),
                        index: i,
                    };
                    if cand.distance > radius {
                        continue;
                    }
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|worst| cand < *worst) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                threshold,
                left,
                right,
            } => {
                let c = match axis {
                    Axis::X => q.0,
                    Axis::Y => q.1,
                };
                let (near, far, gap) = if c < threshold {
                    (left, right, threshold - c)
                } else {
                    (right, left, c - threshold)
                };
                self.knn_node(near, q, exclude, k, radius, heap, stats);
                let bound = match heap.peek() {
                    Some(worst) if heap.len() == k => worst.distance.min(radius),
                    _ => radius,
                };
                // Distances on the far side are >= gap; equality must still be
                // explored for id tie-breaking.
                if gap <= bound {
                    self.knn_node(far, q, exclude, k, radius, heap, stats);
                }
            }
        }
    }

    /// Start of a removal-aware search over this tree; every point begins
    /// available.
    pub fn availability(&self) -> Availability<'_> {
        Availability::new(self)
    }

    /// Every point within `radius` of point `query` (itself excluded), sorted
    /// by distance then index.
    pub fn within_radius(&self, query: usize, radius: f64) -> Result<NeighborList> {
        self.check_query(query, radius)?;
        let q = (self.xs[query], self.ys[query]);
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if i == query {
                            continue;
                        }
                        let d = euclidean(q.0, q.1, self.xs[i], self.ys[i]);
                        if d <= radius {
                            out.push(Candidate {
                                distance: d,
                                index: i,
                            });
                        }
                    }
                }
                Node::Split {
                    axis,
                    threshold,
                    left,
                    right,
                } => {
                    let c = match axis {
                        Axis::X => q.0,
                        Axis::Y => q.1,
                    };
                    if c < threshold {
                        stack.push(left);
                        if threshold - c <= radius {
                            stack.push(right);
                        }
                    } else {
                        stack.push(right);
                        if c - threshold <= radius {
                            stack.push(left);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.distance,
            })
            .collect())
    }
}

/// Per-node counts of points not yet removed, so that nearest searches skip
/// exhausted subtrees. The tree itself stays untouched.
#[derive(Debug, Clone)]
pub struct Availability<'t> {
    tree: &'t KdTree,
    free: Vec<bool>,
    counts: Vec<usize>,
    parent: Vec<usize>,
    leaf_of: Vec<usize>,
}

impl<'t> Availability<'t> {
    fn new(tree: &'t KdTree) -> Self {
        let m = tree.nodes.len();
        let mut av = Availability {
            tree,
            free: vec![true; tree.len()],
            counts: vec![0; m],
            parent: vec![usize::MAX; m],
            leaf_of: vec![0; tree.len()],
        };
        av.init(0);
        av
    }

    fn init(&mut self, node: usize) -> usize {
        let c = match self.tree.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.tree.order[start..end] {
                    self.leaf_of[i] = node;
                }
                end - start
            }
            Node::Split { left, right, .. } => {
                self.parent[left] = node;
                self.parent[right] = node;
                self.init(left) + self.init(right)
            }
        };
        self.counts[node] = c;
        c
    }

    pub fn is_free(&self, index: usize) -> bool {
        self.free[index]
    }

    /// Number of points still available.
    pub fn remaining(&self) -> usize {
        self.counts[0]
    }

    /// Marks `index` as taken. Removing twice is a no-op.
    pub fn remove(&mut self, index: usize) {
        if !std::mem::replace(&mut self.free[index], false) {
            return;
        }
        let mut node = self.leaf_of[index];
        loop {
            self.counts[node] -= 1;
            if node == 0 {
                break;
            }
            node = self.parent[node];
        }
    }

    /// Nearest available point to point `query` (itself excluded) within
    /// `radius`, ties to the lower index.
    pub fn nearest(&self, query: usize, radius: f64) -> Result<Option<Neighbor>> {
        self.tree.check_query(query, radius)?;
        let q = (self.tree.xs[query], self.tree.ys[query]);
        let mut best: Option<Candidate> = None;
        self.search(0, q, query, radius, &mut best);
        Ok(best.map(|c| Neighbor {
            index: c.index,
            distance: c.distance,
        }))
    }

    fn search(
        &self,
        node: usize,
        q: (f64, f64),
        exclude: usize,
        radius: f64,
        best: &mut Option<Candidate>,
    ) {
        if self.counts[node] == 0 {
            return;
        }
        let tree = self.tree;
        match tree.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &tree.order[start..end] {
                    if i == exclude || !self.free[i] {
                        continue;
                    }
                    let cand = Candidate {
                        distance: euclidean(q.0, q.1, tree.xs[i], tree.ys[i]),
                        index: i,
                    };
                    if cand.distance <= radius && best.is_none_or(|b| cand < b) {
                        *best = Some(cand);
                    }
                }
            }
            Node::Split {
                axis,
                threshold,
                left,
                right,
            } => {
                let c = match axis {
                    Axis::X => q.0,
                    Axis::Y => q.1,
                };
                let (near, far, gap) = if c < threshold {
                    (left, right, threshold - c)
                } else {
                    (right, left, c - threshold)
                };
                self.search(near, q, exclude, radius, best);
                let bound = best.map_or(radius, |b| b.distance.min(radius));
                if gap <= bound {
                    self.search(far, q, exclude, radius, best);
                }
            }
        }
    }
}
