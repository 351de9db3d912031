use super::triangle::{closest_point_unchecked, ClosestPoint};
use crate::geometry::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.inf(&other.lo),
            hi: self.hi.sup(&other.hi),
        }
    }

    fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.lo[k] <= other.lo[k] && other.hi[k] <= self.hi[k])
    }

    fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.lo[k] {
                self.lo[k] - p[k]
            } else if p[k] > self.hi[k] {
                p[k] - self.hi[k]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }
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

/// Nearest-triangle hit returned by [`TriangleBvh::closest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub triangle: usize,
    pub closest: ClosestPoint,
}

/// Axis-aligned bounding-box hierarchy over triangles at fixed vertex
/// positions. Rebuilt whenever the positions change.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    corners: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    /// `triangles` index into `positions`.
    pub fn build(positions: &[Vec3], triangles: &[[usize; 3]]) -> Self {
        let corners: Vec<[Vec3; 3]> = triangles.iter().map(|t| t.map(|i| positions[i])).collect();
        let centroids: Vec<Vec3> = corners.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
        let mut bvh = Self {
            corners,
            order: (0..triangles.len()).collect(),
            nodes: Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1),
        };
        if !triangles.is_empty() {
            bvh.build_range(&centroids, 0, triangles.len());
        }
        bvh
    }

    pub fn num_triangles(&self) -> usize {
        self.corners.len()
    }

    fn range_bounds(&self, start: usize, end: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &self.corners[t] {
                b.grow(p);
            }
        }
        b
    }

    fn build_range(&mut self, centroids: &[Vec3], start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        let bounds = self.range_bounds(start, end);
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            cb.grow(&centroids[t]);
        }
        let axis = (cb.hi - cb.lo).imax();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build_range(centroids, start, mid);
        let right = self.build_range(centroids, mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Exact closest triangle to `p`. Among equidistant triangles the first
    /// one reached in the fixed traversal order wins.
    pub fn closest(&self, p: &Vec3) -> Option<TriangleHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<TriangleHit> = None;
        let mut best_d2 = f64::INFINITY;
        let mut stack = Vec::with_capacity(64);
        stack.push((0usize, self.nodes[0].bounds().distance_squared(p)));
        while let Some((id, box_d2)) = stack.pop() {
            if box_d2 > best_d2 {
                continue;
            }
            match self.nodes[id] {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = &self.corners[t];
                        let cp = closest_point_unchecked(p, a, b, c);
                        let d2 = cp.distance * cp.distance;
                        if d2 < best_d2 {
                            best_d2 = d2;
                            best = Some(TriangleHit {
                                triangle: t,
                                closest: cp,
                            });
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    // Push the farther child first so the nearer one is popped next.
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best
    }

    /// Checks that every triangle sits in exactly one leaf and that parent
    /// boxes contain their children.
    pub fn check_invariants(&self) -> bool {
        let mut seen = vec![0u32; self.corners.len()];
        for node in &self.nodes {
            match node {
                Node::Leaf { bounds, start, end } => {
                    for &t in &self.order[*start..*end] {
                        seen[t] += 1;
                        let mut tb = Aabb::empty();
                        for p in &self.corners[t] {
                            tb.grow(p);
                        }
                        if !bounds.contains(&tb) {
                            return false;
                        }
                    }
                }
                Node::Inner { bounds, left, right } => {
                    let children = self.nodes[*left].bounds().merge(self.nodes[*right].bounds());
                    if !bounds.contains(&children) {
                        return false;
                    }
                }
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}
