//! Closest-point correspondences between the observed cloud and the deformed
//! mesh surface.
//!
//! Each observed point `y_i` is matched to its closest point `ỹ_i` on the
//! deformed surface, written as a barycentric combination of the three
//! corner nodes of the hit triangle. Stacked over all points these weights
//! form a `3m × 3n` matrix `C` with three nonzeros per scalar row; it is kept
//! implicit and only ever applied through [`CorrespondenceSet::apply_c`] and
//! [`CorrespondenceSet::apply_ct`].

mod bvh;
mod triangle;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use bvh::{TriangleBvh, TriangleHit};
pub use triangle::{closest_point_on_triangle, ClosestPoint};

pub(crate) use triangle::closest_point_unchecked;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SurfaceMesh, Vec3};

/// Match of one observed point to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub triangle: usize,
    /// Volume-node indices of the triangle corners.
    pub nodes: [usize; 3],
    pub bary: [f64; 3],
    /// `ỹ_i`, the closest surface point.
    pub closest: Vec3,
    pub distance: f64,
}

/// Implicit sparse correspondence matrix `C` (`3m × 3n`).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    entries: Vec<Correspondence>,
    num_nodes: usize,
}

/// Matches every cloud point to its exact closest point on the surface at
/// `positions` (deformed node positions indexed like the volume mesh).
pub fn build_correspondences(
    surface: &SurfaceMesh,
    positions: &[Vec3],
    cloud: &PointCloud,
) -> Result<CorrespondenceSet> {
    if surface.triangles().is_empty() {
        return Err(Error::EmptySurface);
    }
    if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument("deformed positions are not finite".into()));
    }
    let tris = surface.triangles();
    let bvh = TriangleBvh::build(positions, tris);
    let entries = cloud
        .points()
        .par_iter()
        .map(|y| {
            let hit = bvh.closest(y).expect("non-empty hierarchy");
            Correspondence {
                triangle: hit.triangle,
                nodes: tris[hit.triangle],
                bary: hit.closest.bary,
                closest: hit.closest.point,
                distance: hit.closest.distance,
            }
        })
        .collect();
    Ok(CorrespondenceSet {
        entries,
        num_nodes: positions.len(),
    })
}

impl CorrespondenceSet {
    /// Builds a set from explicit entries (for frozen-correspondence studies).
    pub fn from_entries(entries: Vec<Correspondence>, num_nodes: usize) -> Result<Self> {
        for e in &entries {
            if let Some(&bad) = e.nodes.iter().find(|&&i| i >= num_nodes) {
                return Err(Error::InvalidArgument(format!(
                    "correspondence node {bad} out of range"
                )));
            }
        }
        Ok(Self { entries, num_nodes })
    }

    pub fn entries(&self) -> &[Correspondence] {
        &self.entries
    }

    /// `m`, the number of observed points.
    pub fn num_points(&self) -> usize {
        self.entries.len()
    }

    /// `n`, the number of volume nodes.
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn mean_distance(&self) -> f64 {
        self.entries.iter().map(|e| e.distance).sum::<f64>() / self.entries.len().max(1) as f64
    }

    pub fn rms_distance(&self) -> f64 {
        (self.entries.iter().map(|e| e.distance * e.distance).sum::<f64>() / self.entries.len().max(1) as f64).sqrt()
    }

    /// `C v` for a `3n` nodal vector; one 3-block per observed point.
    pub fn apply_c(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != 3 * self.num_nodes {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.num_nodes,
                actual: v.len(),
            });
        }
        let mut out = vec![0.0; 3 * self.entries.len()];
        for (e, o) in self.entries.iter().zip(out.chunks_exact_mut(3)) {
            for (&node, &w) in e.nodes.iter().zip(&e.bary) {
                for d in 0..3 {
                    o[d] += w * v[3 * node + d];
                }
            }
        }
        Ok(out)
    }

    /// `Cᵀ r` for a `3m` residual: scatters each point's residual onto its
    /// three nodes with the barycentric weights.
    pub fn apply_ct(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != 3 * self.entries.len() {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.entries.len(),
                actual: r.len(),
            });
        }
        let mut out = vec![0.0; 3 * self.num_nodes];
        for (e, ri) in self.entries.iter().zip(r.chunks_exact(3)) {
            for (&node, &w) in e.nodes.iter().zip(&e.bary) {
                for d in 0..3 {
                    out[3 * node + d] += w * ri[d];
                }
            }
        }
        Ok(out)
    }

    /// `point_id,triangle_id,l1,l2,l3,distance` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point_id,triangle_id,l1,l2,l3,distance\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{:?},{:?},{:?},{:?}",
                e.triangle, e.bary[0], e.bary[1], e.bary[2], e.distance
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VolumeMesh;

    fn unit_tet() -> VolumeMesh {
        VolumeMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()], vec![[0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn vertices_map_to_themselves() {
        let mesh = unit_tet();
        let cloud = PointCloud::new(mesh.nodes().to_vec()).unwrap();
        let corr = build_correspondences(mesh.surface(), mesh.nodes(), &cloud).unwrap();
        for (i, e) in corr.entries().iter().enumerate() {
            assert_eq!(e.distance, 0.0);
            let k = e.nodes.iter().position(|&n| n == i).unwrap();
            assert_eq!(e.bary[k], 1.0);
        }
    }

    #[test]
    fn single_triangle_surface() {
        let positions = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let surface = SurfaceMesh::from_triangles(&positions, vec![[0, 1, 2]]).unwrap();
        let cloud = PointCloud::new(vec![
            Vec3::new(5.0, 5.0, 5.0),
            Vec3::new(-1.0, 0.2, 0.0),
            Vec3::new(0.1, 0.1, -3.0),
        ])
        .unwrap();
        let corr = build_correspondences(&surface, &positions, &cloud).unwrap();
        assert!(corr.entries().iter().all(|e| e.triangle == 0));
    }

    #[test]
    fn rows_sum_to_one_and_dimensions_checked() {
        let mesh = unit_tet();
        let cloud = PointCloud::new(vec![Vec3::new(0.3, 0.3, 0.3), Vec3::new(2.0, -1.0, 0.5)]).unwrap();
        let corr = build_correspondences(mesh.surface(), mesh.nodes(), &cloud).unwrap();
        let ones = vec![1.0; 12];
        assert!(corr.apply_c(&ones).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(matches!(corr.apply_c(&[0.0; 9]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(corr.apply_ct(&[0.0; 5]), Err(Error::DimensionMismatch { .. })));
        assert!(corr.apply_ct(&[0.0; 6]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_vertex_weight_lands_on_one_node() {
        let entry = Correspondence {
            triangle: 0,
            nodes: [2, 0, 1],
            bary: [1.0, 0.0, 0.0],
            closest: Vec3::zeros(),
            distance: 0.0,
        };
        let corr = CorrespondenceSet::from_entries(vec![entry], 3).unwrap();
        let out = corr.apply_ct(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_dump() {
        let mesh = unit_tet();
        let cloud = PointCloud::new(vec![Vec3::new(0.2, 0.2, -1.0)]).unwrap();
        let corr = build_correspondences(mesh.surface(), mesh.nodes(), &cloud).unwrap();
        let csv = corr.to_csv();
        assert!(csv.starts_with("point_id,triangle_id,l1,l2,l3,distance\n0,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
