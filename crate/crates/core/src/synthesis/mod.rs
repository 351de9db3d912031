//! Ground-truthed registration problems: a known force field is applied to a
//! mesh, the deformed surface is partially cropped and optionally noised,
//! and the result is kept together with the true displacements.

mod case;
mod forces;
mod phantom;

pub use case::{
    generate_case, perturb_rigid, CaseSpec, CropSeed, SyntheticCase, CASE_CLOUD_FILE, CASE_MESH_FILE, CASE_TRUTH_FILE,
};
pub use forces::{extreme_surface_point, nearest_surface_node, surface_nodes_facing, surface_patch, ForceSpec};
pub use phantom::{box_mesh, grid_mesh, liver_phantom, LIVER_PHANTOM_CELLS, LIVER_PHANTOM_SEMI_AXES};

use crate::error::Result;
use crate::geometry::{Vec3, VolumeMesh};

/// Largest displacement of the reference load case, in mm.
pub const REFERENCE_PEAK_DISPLACEMENT: f64 = 15.0;

/// Visible area fraction of the reference load case.
pub const REFERENCE_VISIBILITY: f64 = 0.64;

/// Posterior attachment nodes of the liver phantom: the downward-facing
/// surface under the right lobe.
pub fn phantom_attachment_nodes(mesh: &VolumeMesh) -> Vec<usize> {
    let facing = surface_nodes_facing(mesh, &-Vec3::z(), 0.5);
    let anchor = mesh.nodes()[nearest_surface_node(mesh, &Vec3::new(-40.0, 0.0, -200.0))];
    facing
        .into_iter()
        .filter(|&i| (mesh.nodes()[i] - anchor).norm() <= 55.0)
        .collect()
}

/// Posterior surface nodes: every surface node whose normal points down.
pub fn posterior_nodes(mesh: &VolumeMesh) -> Vec<usize> {
    surface_nodes_facing(mesh, &-Vec3::z(), 0.0)
}

/// Reference in-silico load case on a phantom: a downward patch load on the
/// anterior surface, a posterior attachment held fixed, and the anterior
/// surface cropped as the observed cloud.
pub fn reference_spec(mesh: &VolumeMesh) -> CaseSpec {
    CaseSpec {
        forces: ForceSpec::AxisPatch {
            direction: -Vec3::z(),
            center: Vec3::new(20.0, 0.0, 200.0),
            radius: 45.0,
            magnitude: 1.0,
        },
        visibility: REFERENCE_VISIBILITY,
        noise_sigma: 0.0,
        seed: 0,
        fixed_nodes: Some(phantom_attachment_nodes(mesh)),
        peak_displacement: Some(REFERENCE_PEAK_DISPLACEMENT),
        crop_seed: CropSeed::Extreme(Vec3::z()),
        ..CaseSpec::default()
    }
}

/// The liver phantom at its default resolution.
pub fn default_phantom() -> Result<VolumeMesh> {
    liver_phantom(LIVER_PHANTOM_CELLS)
}
