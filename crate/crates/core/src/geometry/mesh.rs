use std::collections::HashMap;

use super::{bbox_diagonal, signed_tet_volume, triangle_area, Vec3};
use crate::error::{Error, Result};

/// Relative volume below which a tetrahedron is rejected as degenerate.
pub(crate) const DEGENERATE_VOLUME_RTOL: f64 = 1e-12;
/// Relative area below which a boundary triangle is rejected.
pub(crate) const DEGENERATE_AREA_RTOL: f64 = 1e-12;

/// Reference tetrahedral mesh of the organ.
///
/// Construction validates indices, rejects degenerate or duplicated tets,
/// flips negatively oriented tets to positive volume and extracts the
/// boundary surface.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMesh {
    nodes: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    surface: SurfaceMesh,
}

/// Boundary triangulation of a [`VolumeMesh`].
///
/// Triangles index directly into the parent volume's node array so that
/// displacements and correspondences never need a remapping step.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    node_indices: Vec<usize>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
}

impl VolumeMesh {
    pub fn new(nodes: Vec<Vec3>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        let n = nodes.len();
        if let Some(i) = nodes.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Topology(format!("node {i} has non-finite coordinates")));
        }
        if tets.is_empty() {
            return Err(Error::Topology("mesh has no tetrahedra".into()));
        }
        let diag = bbox_diagonal(&nodes);
        let min_volume = DEGENERATE_VOLUME_RTOL * diag.powi(3);

        let mut seen: HashMap<[usize; 4], usize> = HashMap::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&i| i >= n) {
                return Err(Error::Topology(format!(
                    "tet {t} references node {bad}, but the mesh has {n} nodes"
                )));
            }
            let mut key = *tet;
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Topology(format!("tet {t} repeats a node: {tet:?}")));
            }
            if let Some(prev) = seen.insert(key, t) {
                return Err(Error::Topology(format!("tets {prev} and {t} are duplicates")));
            }
            let [a, b, c, d] = tet.map(|i| nodes[i]);
            let vol = signed_tet_volume(&a, &b, &c, &d);
            if vol.abs() <= min_volume {
                return Err(Error::Topology(format!("tet {t} is degenerate (volume {vol:e})")));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }

        let surface = extract_surface(&nodes, &tets)?;
        Ok(Self { nodes, tets, surface })
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn surface(&self) -> &SurfaceMesh {
        &self.surface
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.nodes)
    }

    pub fn tet_positions(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|i| self.nodes[i])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_positions(t);
        signed_tet_volume(&a, &b, &c, &d)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    /// Node positions displaced by `u` (a flat `3n` vector).
    pub fn deformed_nodes(&self, u: &[f64]) -> Vec<Vec3> {
        debug_assert_eq!(u.len(), self.num_dofs());
        self.nodes
            .iter()
            .zip(u.chunks_exact(3))
            .map(|(x, d)| x + Vec3::new(d[0], d[1], d[2]))
            .collect()
    }

    /// Same connectivity, new node positions. The surface is re-extracted
    /// because triangle areas change.
    pub fn with_nodes(&self, nodes: Vec<Vec3>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                actual: nodes.len(),
            });
        }
        Self::new(nodes, self.tets.clone())
    }

    /// Sorted, de-duplicated list of nodes sharing a tet with each node
    /// (the node itself included).
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for tet in &self.tets {
            for &a in tet {
                adj[a].extend_from_slice(tet);
            }
        }
        for (i, list) in adj.iter_mut().enumerate() {
            list.push(i);
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

impl SurfaceMesh {
    /// Builds a surface from triangles given in parent-node indices.
    pub fn from_triangles(positions: &[Vec3], triangles: Vec<[usize; 3]>) -> Result<Self> {
        let diag = bbox_diagonal(positions);
        let min_area = DEGENERATE_AREA_RTOL * diag * diag;
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= positions.len()) {
                return Err(Error::Topology(format!(
                    "triangle {t} references node {bad} out of range"
                )));
            }
            let [a, b, c] = tri.map(|i| positions[i]);
            let area = triangle_area(&a, &b, &c);
            if area <= min_area {
                return Err(Error::Topology(format!(
                    "boundary triangle {t} has near-zero area {area:e}"
                )));
            }
            areas.push(area);
        }
        let mut node_indices: Vec<usize> = triangles.iter().flatten().copied().collect();
        node_indices.sort_unstable();
        node_indices.dedup();
        Ok(Self {
            node_indices,
            triangles,
            areas,
        })
    }

    /// Volume-node indices referenced by the surface, ascending.
    pub fn node_indices(&self) -> &[usize] {
        &self.node_indices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Triangle areas at the reference configuration.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn num_nodes(&self) -> usize {
        self.node_indices.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Area-weighted outward vertex normals at `positions`, keyed by volume
    /// node index. Interior nodes get a zero vector.
    pub fn vertex_normals(&self, positions: &[Vec3]) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); positions.len()];
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| positions[i]);
            let n = (b - a).cross(&(c - a));
            for &i in tri {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// Indices of triangles sharing an edge with each triangle.
    pub fn triangle_adjacency(&self) -> Vec<Vec<usize>> {
        let mut edge_owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edge_owner.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut adj = vec![Vec::new(); self.triangles.len()];
        for owners in edge_owner.values() {
            for &t in owners {
                adj[t].extend(owners.iter().copied().filter(|&o| o != t));
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Boundary faces of a tetrahedral mesh: faces belonging to exactly one tet,
/// wound so their normal points out of that tet.
///
/// Tets must already be positively oriented. Faces shared by more than two
/// tets are a topology error.
pub fn extract_surface(nodes: &[Vec3], tets: &[[usize; 4]]) -> Result<SurfaceMesh> {
    // Outward-wound faces of a positively oriented tet (a, b, c, d).
    const FACES: [[usize; 3]; 4] = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];

    let mut count: HashMap<[usize; 3], (u32, [usize; 3])> = HashMap::with_capacity(tets.len() * 4);
    let mut order: Vec<[usize; 3]> = Vec::with_capacity(tets.len() * 4);
    for tet in tets {
        for face in FACES {
            let oriented = face.map(|k| tet[k]);
            let mut key = oriented;
            key.sort_unstable();
            let entry = count.entry(key).or_insert_with(|| {
                order.push(key);
                (0, oriented)
            });
            entry.0 += 1;
            if entry.0 > 2 {
                return Err(Error::Topology(format!(
                    "face {key:?} is shared by more than two tetrahedra"
                )));
            }
        }
    }
    let triangles: Vec<[usize; 3]> = order
        .into_iter()
        .filter_map(|key| {
            let (c, oriented) = count[&key];
            (c == 1).then_some(oriented)
        })
        .collect();
    SurfaceMesh::from_triangles(nodes, triangles)
}
