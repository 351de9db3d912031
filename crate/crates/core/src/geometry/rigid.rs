use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::{PointCloud, Vec3, VolumeMesh};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Checks `RᵀR = I` and `det R = +1` to 1e-10.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "rotation is not proper orthonormal (|RᵀR - I| = {ortho:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("translation is not finite".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = if axis.norm() == 0.0 || angle == 0.0 {
            Matrix3::identity()
        } else {
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
        };
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Geometry that can be moved by a rigid transform.
pub trait Transformable: Sized {
    fn transformed(&self, t: &RigidTransform) -> Self;
}

impl Transformable for PointCloud {
    fn transformed(&self, t: &RigidTransform) -> Self {
        self.map_points(|p| t.apply(p))
    }
}

impl Transformable for VolumeMesh {
    fn transformed(&self, t: &RigidTransform) -> Self {
        let nodes = self.nodes().iter().map(|p| t.apply(p)).collect();
        // Orientation and areas are preserved by proper rigid motions.
        self.with_nodes(nodes).expect("rigid motion preserves mesh validity")
    }
}

impl Transformable for Vec<Vec3> {
    fn transformed(&self, t: &RigidTransform) -> Self {
        self.iter().map(|p| t.apply(p)).collect()
    }
}
