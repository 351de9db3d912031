//! Linear-elastic tetrahedral finite elements.
//!
//! The raw stiffness `K` of an unconstrained body is singular: its kernel
//! holds the six rigid motions. A [`StiffnessSystem`] makes it invertible by
//! adding a soft spring `k_ss` to every diagonal entry (optionally together
//! with stiff penalty springs on known fixed nodes), then factorizes it once
//! with a sparse Cholesky decomposition. Every later force-to-displacement
//! solve reuses that factor.

mod cholesky;
mod element;
mod material;
mod ordering;
mod sparse;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cholesky::SparseCholesky;
pub use element::{element_stiffness, ElementMatrix};
pub use material::ElasticMaterial;
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};
use crate::geometry::{DisplacementField, VolumeMesh};

use element::shape_gradients;

/// Nodal forces, flat `3n`, indexed like the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField(Vec<f64>);

impl ForceField {
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
            return Err(Error::InvalidArgument("force has non-finite entries".into()));
        }
        Ok(Self(values))
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

    /// Nodes carrying a nonzero force.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .chunks_exact(3)
            .enumerate()
            .filter(|(_, f)| f.iter().any(|&v| v != 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

fn mesh_fingerprint(mesh: &VolumeMesh) -> u64 {
    let mut h = DefaultHasher::new();
    mesh.num_nodes().hash(&mut h);
    mesh.tets().hash(&mut h);
    for p in mesh.nodes() {
        for c in p.iter() {
            c.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// Assembled raw stiffness `K` (no stabilization).
#[derive(Debug, Clone)]
pub struct StiffnessMatrix {
    matrix: SparseMatrix,
    material: ElasticMaterial,
    num_nodes: usize,
    mesh_key: u64,
    node_order: Vec<usize>,
}

impl StiffnessMatrix {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn material(&self) -> &ElasticMaterial {
        &self.material
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn mean_diagonal(&self) -> f64 {
        let d = self.matrix.diagonal();
        d.iter().sum::<f64>() / d.len() as f64
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.matrix.to_matrix_market()).map_err(|e| Error::io(path, e))
    }
}

/// Global stiffness by scatter-adding every element matrix.
///
/// The sparsity pattern couples exactly the nodes that share a tet. Element
/// matrices are computed in parallel and summed in tet order, so the result
/// is deterministic and exactly symmetric.
pub fn assemble(mesh: &VolumeMesh, material: &ElasticMaterial) -> Result<StiffnessMatrix> {
    let n = mesh.num_nodes();
    let adjacency = mesh.node_adjacency();

    let mut row_ptr = Vec::with_capacity(3 * n + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    for nb in &adjacency {
        for _ in 0..3 {
            for &j in nb {
                cols.extend([3 * j, 3 * j + 1, 3 * j + 2]);
            }
            row_ptr.push(cols.len());
        }
    }
    let vals = vec![0.0; cols.len()];
    let mut matrix = SparseMatrix::from_parts(3 * n, row_ptr, cols, vals);

    let elements: Vec<ElementMatrix> = (0..mesh.tets().len())
        .into_par_iter()
        .map(|t| {
            element_stiffness(&mesh.tet_positions(t), material).map_err(|e| match e {
                Error::DegenerateElement { volume, threshold, .. } => Error::DegenerateElement {
                    index: t,
                    volume,
                    threshold,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    let row_ptr = matrix.row_ptr().to_vec();
    let values = matrix.values_mut();
    for (tet, ke) in mesh.tets().iter().zip(&elements) {
        for (a, &i) in tet.iter().enumerate() {
            for (b, &j) in tet.iter().enumerate() {
                let block = adjacency[i].binary_search(&j).expect("tet neighbours are adjacent");
                for r in 0..3 {
                    let base = row_ptr[3 * i + r] + 3 * block;
                    for c in 0..3 {
                        values[base + c] += ke[(3 * a + r, 3 * b + c)];
                    }
                }
            }
        }
    }

    let node_order = ordering::minimum_degree(&adjacency);
    Ok(StiffnessMatrix {
        matrix,
        material: *material,
        num_nodes: n,
        mesh_key: mesh_fingerprint(mesh),
        node_order,
    })
}

/// How the soft-spring constant relates to the stiffness scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpringScaling {
    /// `k_ss` is added as given.
    #[default]
    Absolute,
    /// `k_ss` is multiplied by the mean diagonal of the raw `K`.
    MeanDiagonal,
}

/// Stiff springs tying `nodes` to prescribed positions (zero displacement
/// unless a right-hand side says otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConstraint {
    pub nodes: Vec<usize>,
    /// Spring stiffness; `None` selects `1e8 × mean(diag K)`.
    pub stiffness: Option<f64>,
}

impl PenaltyConstraint {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self { nodes, stiffness: None }
    }
}

const DEFAULT_PENALTY_FACTOR: f64 = 1e8;

/// Stabilization applied to the raw stiffness before factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct Stabilization {
    pub k_ss: f64,
    pub scaling: SpringScaling,
    pub penalty: Option<PenaltyConstraint>,
}

impl Stabilization {
    pub fn soft_springs(k_ss: f64) -> Self {
        Self {
            k_ss,
            scaling: SpringScaling::Absolute,
            penalty: None,
        }
    }
}

/// Stabilized stiffness `K' = K + k_ss I (+ penalties)` with its cached
/// Cholesky factor. Immutable; concurrent solves are safe.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    matrix: SparseMatrix,
    factor: SparseCholesky,
    material: ElasticMaterial,
    k_ss: f64,
    penalty_stiffness: f64,
    penalty_nodes: Vec<usize>,
    num_nodes: usize,
    mesh_key: u64,
}

/// `K ← K + k_ss I`, then factorize.
pub fn stabilize(raw: &StiffnessMatrix, k_ss: f64) -> Result<StiffnessSystem> {
    StiffnessSystem::new(raw, &Stabilization::soft_springs(k_ss))
}

impl StiffnessSystem {
    pub fn new(raw: &StiffnessMatrix, stab: &Stabilization) -> Result<Self> {
        if !(stab.k_ss >= 0.0 && stab.k_ss.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "soft-spring constant must be non-negative, got {}",
                stab.k_ss
            )));
        }
        let mean_diag = raw.mean_diagonal();
        let k_ss = match stab.scaling {
            SpringScaling::Absolute => stab.k_ss,
            SpringScaling::MeanDiagonal => stab.k_ss * mean_diag,
        };
        let (penalty_nodes, penalty_stiffness) = match &stab.penalty {
            Some(pc) => {
                if let Some(&bad) = pc.nodes.iter().find(|&&i| i >= raw.num_nodes) {
                    return Err(Error::InvalidArgument(format!(
                        "fixed node {bad} out of range (n = {})",
                        raw.num_nodes
                    )));
                }
                let k = pc.stiffness.unwrap_or(DEFAULT_PENALTY_FACTOR * mean_diag);
                if !(k > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "penalty stiffness must be positive, got {k}"
                    )));
                }
                let mut nodes = pc.nodes.clone();
                nodes.sort_unstable();
                nodes.dedup();
                (nodes, k)
            }
            None => (Vec::new(), 0.0),
        };

        let mut matrix = raw.matrix.clone();
        let mut penalized = vec![false; raw.num_nodes];
        for &i in &penalty_nodes {
            penalized[i] = true;
        }
        matrix.add_to_diagonal(|dof| k_ss + if penalized[dof / 3] { penalty_stiffness } else { 0.0 });

        let perm: Vec<usize> = raw
            .node_order
            .iter()
            .flat_map(|&v| [3 * v, 3 * v + 1, 3 * v + 2])
            .collect();
        let factor = SparseCholesky::factor(&matrix, perm)?;
        Ok(Self {
            matrix,
            factor,
            material: raw.material,
            k_ss,
            penalty_stiffness,
            penalty_nodes,
            num_nodes: raw.num_nodes,
            mesh_key: raw.mesh_key,
        })
    }

    /// Assemble, stabilize and factorize in one go.
    pub fn build(mesh: &VolumeMesh, material: &ElasticMaterial, stab: &Stabilization) -> Result<Self> {
        Self::new(&assemble(mesh, material)?, stab)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn factor(&self) -> &SparseCholesky {
        &self.factor
    }

    pub fn material(&self) -> &ElasticMaterial {
        &self.material
    }

    /// Soft-spring constant actually added to the diagonal.
    pub fn k_ss(&self) -> f64 {
        self.k_ss
    }

    pub fn penalty_nodes(&self) -> &[usize] {
        &self.penalty_nodes
    }

    pub fn penalty_stiffness(&self) -> f64 {
        self.penalty_stiffness
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.num_nodes
    }

    /// True if this system was assembled from `mesh`.
    pub fn is_for(&self, mesh: &VolumeMesh) -> bool {
        self.num_nodes == mesh.num_nodes() && self.mesh_key == mesh_fingerprint(mesh)
    }

    /// Tangent stiffness at displacement `u`. The material is linear, so
    /// this is the same system for every `u`; a nonlinear material would
    /// reassemble and refactorize here.
    pub fn tangent(&self, _u: &DisplacementField) -> &StiffnessSystem {
        self
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_dofs(),
                actual: len,
            });
        }
        Ok(())
    }

    /// `K'⁻¹ rhs` for a raw `3n` vector.
    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs.len())?;
        Ok(self.factor.solve(rhs))
    }

    /// Displacements produced by forces `f`: `u = K'⁻¹ f`.
    pub fn solve(&self, f: &ForceField) -> Result<DisplacementField> {
        self.solve_vec(f.as_slice())
            .map(|u| DisplacementField::from_flat(u).expect("solution length is a multiple of three"))
    }

    /// `K'⁻ᵀ rhs`. `K'` is symmetric, so this is [`solve_vec`](Self::solve_vec);
    /// kept as a separate entry point for the gradient's adjoint solve.
    pub fn solve_adjoint(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_vec(rhs)
    }

    /// `K' u`.
    pub fn multiply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len())?;
        Ok(self.matrix.mul_vec(u))
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.matrix.to_matrix_market()).map_err(|e| Error::io(path, e))
    }
}

/// Small-strain tensor `½(∇u + ∇uᵀ)` of every tet, constant per element.
pub fn element_strains(mesh: &VolumeMesh, u: &DisplacementField) -> Result<Vec<Matrix3<f64>>> {
    if u.num_nodes() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            actual: u.num_nodes(),
        });
    }
    mesh.tets()
        .iter()
        .enumerate()
        .map(|(t, tet)| {
            let x = mesh.tet_positions(t);
            let grads = shape_gradients(&x).ok_or(Error::DegenerateElement {
                index: t,
                volume: mesh.tet_volume(t),
                threshold: 0.0,
            })?;
            let mut h = Matrix3::zeros();
            for (&node, g) in tet.iter().zip(&grads) {
                h += u.node(node) * g.transpose();
            }
            Ok((h + h.transpose()) * 0.5)
        })
        .collect()
}
