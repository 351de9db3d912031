//! Meshes, point clouds, rigid transforms and the file formats they travel in.
//!
//! All coordinates are millimetres. Geometry values are immutable once built
//! and can be shared freely across threads.

mod cloud;
mod crop;
mod displacement;
pub mod io;
mod kdtree;
mod mesh;
mod rigid;

pub use cloud::PointCloud;
pub use crop::{crop_surface, CropResult};
pub use displacement::DisplacementField;
pub use io::{load_point_cloud, load_volume_mesh, save_point_cloud, save_volume_mesh, MeshFormat};
pub use kdtree::KdTree;
pub use mesh::{extract_surface, SurfaceMesh, VolumeMesh};
pub use rigid::{RigidTransform, Transformable};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Diagonal length of the axis-aligned bounding box of `points`.
pub fn bbox_diagonal<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut any = false;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
        any = true;
    }
    if any {
        (hi - lo).norm()
    } else {
        0.0
    }
}

pub(crate) fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Signed volume of the tetrahedron `(a, b, c, d)`; positive when `d` lies on
/// the side of `(b - a) x (c - a)`.
pub(crate) fn signed_tet_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}
