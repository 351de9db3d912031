use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ForceField;
use crate::geometry::{Vec3, VolumeMesh};

/// How the true nodal forces of a synthetic case are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceSpec {
    Zero,
    /// The same force vector on every surface node within `radius` of the
    /// surface node closest to `center`.
    AxisPatch {
        direction: Vec3,
        center: Vec3,
        radius: f64,
        magnitude: f64,
    },
    /// `count` patches around random surface nodes, each with its own
    /// random direction. With `inward` set, each direction is flipped to
    /// point into the body.
    RandomPatches {
        count: usize,
        radius: f64,
        magnitude: f64,
        inward: bool,
    },
}

/// Surface nodes within `radius` of `center`, ascending.
pub fn surface_patch(mesh: &VolumeMesh, center: &Vec3, radius: f64) -> Vec<usize> {
    mesh.surface()
        .node_indices()
        .iter()
        .copied()
        .filter(|&i| (mesh.nodes()[i] - center).norm() <= radius)
        .collect()
}

/// Surface node closest to `p` (lowest index on ties).
pub fn nearest_surface_node(mesh: &VolumeMesh, p: &Vec3) -> usize {
    let nodes = mesh.nodes();
    *mesh
        .surface()
        .node_indices()
        .iter()
        .min_by(|&&a, &&b| (nodes[a] - p).norm().total_cmp(&(nodes[b] - p).norm()).then(a.cmp(&b)))
        .expect("surface has nodes")
}

/// Surface nodes whose outward normal `n` satisfies `n · direction > min_cos`.
pub fn surface_nodes_facing(mesh: &VolumeMesh, direction: &Vec3, min_cos: f64) -> Vec<usize> {
    let dir = direction.normalize();
    let normals = mesh.surface().vertex_normals(mesh.nodes());
    mesh.surface()
        .node_indices()
        .iter()
        .copied()
        .filter(|&i| normals[i].dot(&dir) > min_cos)
        .collect()
}

/// Surface point furthest along `direction`.
pub fn extreme_surface_point(mesh: &VolumeMesh, positions: &[Vec3], direction: &Vec3) -> Vec3 {
    let i = *mesh
        .surface()
        .node_indices()
        .iter()
        .max_by(|&&a, &&b| {
            positions[a]
                .dot(direction)
                .total_cmp(&positions[b].dot(direction))
                .then(b.cmp(&a))
        })
        .expect("surface has nodes");
    positions[i]
}

impl ForceSpec {
    /// Nodal forces for `mesh`. Random layouts draw from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, mesh: &VolumeMesh, rng: &mut R) -> Result<ForceField> {
        let mut f = vec![0.0; mesh.num_dofs()];
        let mut apply = |nodes: &[usize], force: Vec3| {
            for &i in nodes {
                for d in 0..3 {
                    f[3 * i + d] += force[d];
                }
            }
        };
        match self {
            ForceSpec::Zero => {}
            ForceSpec::AxisPatch {
                direction,
                center,
                radius,
                magnitude,
            } => {
                if !(direction.norm() > 0.0) {
                    return Err(Error::InvalidArgument("patch direction must be non-zero".into()));
                }
                let seed = mesh.nodes()[nearest_surface_node(mesh, center)];
                let nodes = surface_patch(mesh, &seed, *radius);
                apply(&nodes, direction.normalize() * *magnitude);
            }
            ForceSpec::RandomPatches {
                count,
                radius,
                magnitude,
                inward,
            } => {
                let surface = mesh.surface().node_indices();
                let normals = mesh.surface().vertex_normals(mesh.nodes());
                for _ in 0..*count {
                    let seed = surface[rng.random_range(0..surface.len())];
                    let v: [f64; 3] = UnitSphere.sample(rng);
                    let mut dir = Vec3::from(v);
                    if *inward && dir.dot(&normals[seed]) > 0.0 {
                        dir = -dir;
                    }
                    let nodes = surface_patch(mesh, &mesh.nodes()[seed], *radius);
                    apply(&nodes, dir * *magnitude);
                }
            }
        }
        ForceField::from_flat(f)
    }
}
