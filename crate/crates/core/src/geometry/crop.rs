use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{triangle_area, PointCloud, SurfaceMesh, Vec3};
use crate::correspondence::closest_point_unchecked;
use crate::error::{Error, Result};

/// Partial surface selected by [`crop_surface`].
#[derive(Debug, Clone)]
pub struct CropResult {
    /// Selected vertices at their deformed positions.
    pub cloud: PointCloud,
    /// Volume-node index of each cloud point.
    pub node_indices: Vec<usize>,
    /// Selected triangle ids, in selection order.
    pub triangles: Vec<usize>,
    /// Selected area over total area, both measured at the deformed positions.
    pub achieved_ratio: f64,
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    // Min-heap on distance, then triangle id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grows a connected patch of triangles outward from the triangle closest to
/// `seed`, in order of centroid-graph distance, until the patch covers at
/// least `target_ratio` of the surface area.
///
/// Areas are measured at `positions` (the deformed node positions, indexed
/// like the parent volume). If the seed's component is exhausted before the
/// target is reached, growth restarts from the closest unselected triangle.
pub fn crop_surface(surface: &SurfaceMesh, positions: &[Vec3], seed: &Vec3, target_ratio: f64) -> Result<CropResult> {
    if !(target_ratio > 0.0) {
        return Err(Error::EmptySelection(format!(
            "target ratio must be positive, got {target_ratio}"
        )));
    }
    if target_ratio > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "target ratio must not exceed 1, got {target_ratio}"
        )));
    }
    if !seed.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument("crop seed is not finite".into()));
    }
    let tris = surface.triangles();
    if tris.is_empty() {
        return Err(Error::EmptySurface);
    }

    let areas: Vec<f64> = tris
        .iter()
        .map(|t| triangle_area(&positions[t[0]], &positions[t[1]], &positions[t[2]]))
        .collect();
    let centroids: Vec<Vec3> = tris
        .iter()
        .map(|t| (positions[t[0]] + positions[t[1]] + positions[t[2]]) / 3.0)
        .collect();
    let seed_distance: Vec<f64> = tris
        .iter()
        .map(|t| closest_point_unchecked(seed, &positions[t[0]], &positions[t[1]], &positions[t[2]]).distance)
        .collect();
    let total: f64 = areas.iter().sum();
    let adjacency = surface.triangle_adjacency();

    let mut selected = vec![false; tris.len()];
    let mut dist = vec![f64::INFINITY; tris.len()];
    let mut order = Vec::new();
    let mut covered = 0.0;
    let mut heap = BinaryHeap::new();

    // Loop over restarts (one per connected component visited).
    while covered < target_ratio * total && order.len() < tris.len() {
        let start = (0..tris.len())
            .filter(|&t| !selected[t])
            .min_by(|&a, &b| seed_distance[a].total_cmp(&seed_distance[b]).then(a.cmp(&b)))
            .expect("unselected triangle remains");
        dist[start] = 0.0;
        heap.push(Frontier(0.0, start));
        while let Some(Frontier(d, t)) = heap.pop() {
            if selected[t] || d > dist[t] {
                continue;
            }
            selected[t] = true;
            order.push(t);
            covered += areas[t];
            if covered >= target_ratio * total {
                break;
            }
            for &nb in &adjacency[t] {
                if selected[nb] {
                    continue;
                }
                let nd = d + (centroids[nb] - centroids[t]).norm();
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(Frontier(nd, nb));
                }
            }
        }
        heap.clear();
    }

    let mut seen = vec![false; positions.len()];
    let mut node_indices = Vec::new();
    for &t in &order {
        for &i in &tris[t] {
            if !seen[i] {
                seen[i] = true;
                node_indices.push(i);
            }
        }
    }
    let cloud = PointCloud::new(node_indices.iter().map(|&i| positions[i]).collect())?;
    let achieved_ratio = if order.len() == tris.len() {
        1.0
    } else {
        covered / total
    };
    Ok(CropResult {
        cloud,
        node_indices,
        triangles: order,
        achieved_ratio,
    })
}
