//! Exact k-nearest-neighbour queries over a point cloud with a kd-tree.

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { lo: usize, hi: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Kd-tree over the rows of a flat row-major `N × d` array.
#[derive(Debug)]
pub(crate) struct KdTree<'a> {
    points: &'a [f64],
    d: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub(crate) fn new(points: &'a [f64], d: usize) -> Self {
        let n = points.len() / d;
        let mut tree = Self { points, d, order: (0..n).collect(), nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1) };
        tree.build(0, n);
        tree
    }

    #[inline]
    fn coord(&self, i: usize, k: usize) -> f64 {
        self.points[i * self.d + k]
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        if hi - lo <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { lo, hi });
            return id;
        }
        // split along the widest coordinate of this cell
        let mut dim = 0;
        let mut widest = -1.0;
        for k in 0..self.d {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[lo..hi] {
                let x = self.coord(i, k);
                mn = mn.min(x);
                mx = mx.max(x);
            }
            if mx - mn > widest {
                widest = mx - mn;
                dim = k;
            }
        }
        let mid = (lo + hi) / 2;
        let (points, d) = (self.points, self.d);
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| points[a * d + dim].total_cmp(&points[b * d + dim]));
        let value = self.coord(self.order[mid], dim);
        self.nodes.push(Node::Leaf { lo, hi });
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Squared distances from row `i` to its `k` nearest other rows, ascending.
    pub(crate) fn knn_excluding_self(&self, i: usize, k: usize) -> Vec<f64> {
        let q = &self.points[i * self.d..(i + 1) * self.d];
        let mut best = Vec::with_capacity(k + 1);
        self.search(0, q, i, k, &mut best);
        best
    }

    fn search(&self, node: usize, q: &[f64], skip: usize, k: usize, best: &mut Vec<f64>) {
        match self.nodes[node] {
            Node::Leaf { lo, hi } => {
                for &j in &self.order[lo..hi] {
                    if j == skip {
                        continue;
                    }
                    let row = &self.points[j * self.d..(j + 1) * self.d];
                    let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    if best.len() < k || d2 < best[k - 1] {
                        let pos = best.partition_point(|&x| x <= d2);
                        best.insert(pos, d2);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, k, best);
                if best.len() < k || diff * diff <= best[k - 1] {
                    self.search(far, q, skip, k, best);
                }
            }
        }
    }
}
