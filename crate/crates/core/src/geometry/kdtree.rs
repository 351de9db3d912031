use super::Vec3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree for nearest-neighbour queries over a fixed point set.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // Permutation of point indices; each node owns a contiguous range.
    index: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
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

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            index: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.index[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.index[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Index and distance of the closest point; ties go to the lower index.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        self.knn(query, 1).into_iter().next()
    }

    /// The `k` closest points as `(index, distance)`, nearest first. Ties in
    /// distance are broken by point index so results are deterministic.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        // Sorted ascending by (d2, index); at most k entries.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.search(0, query, k, &mut best);
        best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn search(&self, node: usize, q: &Vec3, k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.index[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    let cand = (d2, i);
                    if best.len() == k && !lt(cand, best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|&b| lt(b, cand));
                    best.insert(pos, cand);
                    best.truncate(k);
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
                self.search(near, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}

fn lt(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}
