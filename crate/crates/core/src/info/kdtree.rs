//! Static kd-tree over a flat point set, queried in the max norm.
//!
//! Supports the two queries the KSG estimator needs: the distance to the
//! k-th nearest neighbour of an indexed point, and the number of points
//! strictly inside a max-norm ball.

const LEAF_SIZE: usize = 12;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Points reordered so every node covers a contiguous range.
    points: Vec<f64>,
    /// Original index of each reordered point.
    original: Vec<usize>,
    /// Bounding boxes, `2 * dim` values per node: lows then highs.
    boxes: Vec<f64>,
    nodes: Vec<Node>,
}

#[inline]
fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

impl KdTree {
    /// Build over `data`, a row-major array of `data.len() / dim` points.
    pub fn new(dim: usize, data: &[f64]) -> KdTree {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged point data");
        let n = data.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::new(),
            original: Vec::new(),
            boxes: Vec::new(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
        };
        if n > 0 {
            tree.build(data, &mut order, 0, n);
        }
        tree.points = order
            .iter()
            .flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied())
            .collect();
        tree.original = order;
        tree
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    fn build(&mut self, data: &[f64], order: &mut [usize], start: usize, end: usize) -> u32 {
        let dim = self.dim;
        let id = self.nodes.len() as u32;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &order[start..end] {
            for (a, &v) in data[i * dim..(i + 1) * dim].iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&p, &q| {
            data[p * dim + axis].total_cmp(&data[q * dim + axis])
        });
        let left = self.build(data, order, start, mid);
        let right = self.build(data, order, mid, end);
        let node = &mut self.nodes[id as usize];
        node.left = left;
        node.right = right;
        id
    }

    #[inline]
    fn bbox(&self, node: u32) -> (&[f64], &[f64]) {
        let base = node as usize * 2 * self.dim;
        (
            &self.boxes[base..base + self.dim],
            &self.boxes[base + self.dim..base + 2 * self.dim],
        )
    }

    /// Smallest max-norm distance from `q` to the node's box.
    #[inline]
    fn box_min_dist(&self, node: u32, q: &[f64]) -> f64 {
        let (lo, hi) = self.bbox(node);
        let mut d = 0.0f64;
        for a in 0..self.dim {
            d = d.max(lo[a] - q[a]).max(q[a] - hi[a]);
        }
        d
    }

    /// Largest max-norm distance from `q` to any corner of the node's box.
    #[inline]
    fn box_max_dist(&self, node: u32, q: &[f64]) -> f64 {
        let (lo, hi) = self.bbox(node);
        let mut d = 0.0f64;
        for a in 0..self.dim {
            d = d.max((q[a] - lo[a]).abs()).max((hi[a] - q[a]).abs());
        }
        d
    }

    #[inline]
    fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Max-norm distance from `query` to its `k`-th nearest neighbour,
    /// ignoring the point with original index `exclude`.
    pub fn kth_neighbor_distance(&self, query: &[f64], exclude: usize, k: usize) -> f64 {
        assert!(k >= 1);
        let mut best = vec![f64::INFINITY; k];
        if !self.nodes.is_empty() {
            self.knn_visit(0, query, exclude, &mut best);
        }
        best[k - 1]
    }

    fn knn_visit(&self, node: u32, q: &[f64], exclude: usize, best: &mut [f64]) {
        let k = best.len();
        let n = self.nodes[node as usize];
        if n.left == NO_CHILD {
            for slot in n.start as usize..n.end as usize {
                if self.original[slot] == exclude {
                    continue;
                }
                let d = max_dist(self.point(slot), q);
                if d < best[k - 1] {
                    // insertion into the sorted list
                    let mut i = k - 1;
                    while i > 0 && best[i - 1] > d {
                        best[i] = best[i - 1];
                        i -= 1;
                    }
                    best[i] = d;
                }
            }
            return;
        }
        let dl = self.box_min_dist(n.left, q);
        let dr = self.box_min_dist(n.right, q);
        let (first, d_first, second, d_second) = if dl <= dr {
            (n.left, dl, n.right, dr)
        } else {
            (n.right, dr, n.left, dl)
        };
        if d_first < best[k - 1] {
            self.knn_visit(first, q, exclude, best);
        }
        if d_second < best[k - 1] {
            self.knn_visit(second, q, exclude, best);
        }
    }

    /// Number of points at max-norm distance strictly less than `radius`.
    pub fn count_within(&self, query: &[f64], radius: f64) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        self.count_visit(0, query, radius)
    }

    fn count_visit(&self, node: u32, q: &[f64], r: f64) -> usize {
        if self.box_min_dist(node, q) >= r {
            return 0;
        }
        let n = self.nodes[node as usize];
        if self.box_max_dist(node, q) < r {
            return (n.end - n.start) as usize;
        }
        if n.left == NO_CHILD {
            return (n.start as usize..n.end as usize)
                .filter(|&slot| max_dist(self.point(slot), q) < r)
                .count();
        }
        self.count_visit(n.left, q, r) + self.count_visit(n.right, q, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_kth(data: &[f64], dim: usize, i: usize, k: usize) -> f64 {
        let q = &data[i * dim..(i + 1) * dim];
        let mut d: Vec<f64> = (0..data.len() / dim)
            .filter(|&j| j != i)
            .map(|j| max_dist(&data[j * dim..(j + 1) * dim], q))
            .collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    fn brute_count(data: &[f64], dim: usize, q: &[f64], r: f64) -> usize {
        (0..data.len() / dim)
            .filter(|&j| max_dist(&data[j * dim..(j + 1) * dim], q) < r)
            .count()
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            dim in 1usize..5,
            raw in prop::collection::vec(-10.0f64..10.0, 40..400),
            k in 1usize..6,
            radius in 0.0f64..8.0,
        ) {
            let n = raw.len() / dim;
            prop_assume!(n > k);
            let data = &raw[..n * dim];
            let tree = KdTree::new(dim, data);
            for i in (0..n).step_by(7) {
                let q = &data[i * dim..(i + 1) * dim];
                prop_assert_eq!(tree.kth_neighbor_distance(q, i, k), brute_kth(data, dim, i, k));
                prop_assert_eq!(tree.count_within(q, radius), brute_count(data, dim, q, radius));
            }
        }
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::new(2, &[]);
        assert!(t.is_empty());
        assert_eq!(t.count_within(&[0.0, 0.0], 1.0), 0);
    }
}
