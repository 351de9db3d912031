//! Elastic surface-matching registration of tetrahedral organ meshes to
//! sparse intraoperative point clouds.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: meshes, clouds, rigid transforms, file formats, cropping.
//! - [`fem`]: linear tetrahedral stiffness assembly, soft-spring
//!   stabilization and a cached sparse Cholesky factor.
//! - [`correspondence`]: exact closest-point matching onto the deformed
//!   surface and the implicit correspondence operator `C`.
//! - [`registration`]: the accelerated force iteration and rigid
//!   pre-alignment.
//! - [`synthesis`]: ground-truthed phantom cases.
//! - [`evaluation`]: target registration error and aggregation.
//!
//! ```
//! use elastic_register::prelude::*;
//!
//! let mesh = synthesis::box_mesh([4, 3, 3], Vec3::new(40.0, 30.0, 30.0)).unwrap();
//! let cloud = PointCloud::new(mesh.surface().node_indices().iter().map(|&i| mesh.nodes()[i]).collect()).unwrap();
//! let result = registration::register(&mesh, &cloud, &RegistrationConfig::default()).unwrap();
//! assert!(result.u_final.max_norm() < 1e-9);
//! ```

pub mod correspondence;
pub mod error;
pub mod evaluation;
pub mod fem;
pub mod geometry;
pub mod registration;
pub mod synthesis;

pub use error::{Error, Result};

// Runs the book's code listings as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mechanics.md")]
    mod mechanics {}
    #[doc = include_str!("../../../book/src/correspondence.md")]
    mod correspondence {}
    #[doc = include_str!("../../../book/src/registration.md")]
    mod registration {}
    #[doc = include_str!("../../../book/src/synthetic-cases.md")]
    mod synthetic_cases {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

/// Commonly used types in one import.
pub mod prelude {
    pub use crate::correspondence::{build_correspondences, CorrespondenceSet};
    pub use crate::error::{Error, Result};
    pub use crate::fem::{ElasticMaterial, ForceField, Stabilization, StiffnessSystem};
    pub use crate::geometry::{DisplacementField, PointCloud, RigidTransform, SurfaceMesh, Vec3, VolumeMesh};
    pub use crate::registration::{self, RegistrationConfig};
    pub use crate::{evaluation, synthesis};
}
