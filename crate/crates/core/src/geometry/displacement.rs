use super::Vec3;
use crate::error::{Error, Result};

/// Nodal displacements `u`, stored flat as `[ux0, uy0, uz0, ux1, ...]` and
/// indexed congruently with [`VolumeMesh::nodes`](super::VolumeMesh::nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField(Vec<f64>);

impl DisplacementField {
    pub fn zeros(num_nodes: usize) -> Self {
        Self(vec![0.0; 3 * num_nodes])
    }

    pub fn from_flat(values: Vec<f64>) -> Result<Self> {
        if values.len() % 3 != 0 {
            return Err(Error::DimensionMismatch {
                expected: values.len() - values.len() % 3,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("displacement has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn from_vectors(vectors: &[Vec3]) -> Self {
        Self(vectors.iter().flat_map(|v| [v.x, v.y, v.z]).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn num_nodes(&self) -> usize {
        self.0.len() / 3
    }

    pub fn node(&self, i: usize) -> Vec3 {
        Vec3::new(self.0[3 * i], self.0[3 * i + 1], self.0[3 * i + 2])
    }

    pub fn iter_nodes(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.0.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2]))
    }

    /// Largest nodal displacement magnitude.
    pub fn max_norm(&self) -> f64 {
        self.iter_nodes().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn mean_norm(&self) -> f64 {
        let n = self.num_nodes();
        if n == 0 {
            return 0.0;
        }
        self.iter_nodes().map(|v| v.norm()).sum::<f64>() / n as f64
    }
}
