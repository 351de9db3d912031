use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DisplacementField, KdTree, RigidTransform, Vec3, VolumeMesh};

/// Below this distance a query is taken to sit on a node.
pub const COINCIDENCE_TOL: f64 = 1e-9;

const NEIGHBOURS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMode {
    /// Inverse-square-distance weights over the four nearest nodes.
    #[default]
    Idw4,
    /// Displacement of the single nearest node.
    Nearest,
}

/// Scattered-node displacement lookup at arbitrary points.
#[derive(Debug, Clone)]
pub struct DisplacementInterpolator {
    tree: KdTree,
    u: DisplacementField,
    mode: InterpolationMode,
}

impl DisplacementInterpolator {
    pub fn new(nodes: &[Vec3], u: DisplacementField, mode: InterpolationMode) -> Result<Self> {
        if u.num_nodes() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                actual: u.num_nodes(),
            });
        }
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("no nodes to interpolate from".into()));
        }
        Ok(Self {
            tree: KdTree::new(nodes),
            u,
            mode,
        })
    }

    pub fn for_mesh(mesh: &VolumeMesh, u: DisplacementField, mode: InterpolationMode) -> Result<Self> {
        Self::new(mesh.nodes(), u, mode)
    }

    pub fn mode(&self) -> InterpolationMode {
        self.mode
    }

    pub fn displacement(&self) -> &DisplacementField {
        &self.u
    }

    pub fn interpolate(&self, q: &Vec3) -> Vec3 {
        let k = match self.mode {
            InterpolationMode::Idw4 => NEIGHBOURS,
            InterpolationMode::Nearest => 1,
        };
        let hits = self.tree.knn(q, k);
        let (first, d0) = hits[0];
        if d0 < COINCIDENCE_TOL || hits.len() == 1 {
            return self.u.node(first);
        }
        let mut sum = Vec3::zeros();
        let mut wsum = 0.0;
        for &(i, d) in &hits {
            let w = 1.0 / (d * d);
            sum += self.u.node(i) * w;
            wsum += w;
        }
        sum / wsum
    }
}

/// Displacement at `query` interpolated from the four nearest mesh nodes.
pub fn interpolate_displacement(mesh: &VolumeMesh, u: &DisplacementField, query: &Vec3) -> Result<Vec3> {
    Ok(DisplacementInterpolator::for_mesh(mesh, u.clone(), InterpolationMode::Idw4)?.interpolate(query))
}

/// A point mapping from the preoperative to the observed frame.
pub trait TargetMap {
    fn map_point(&self, x: &Vec3) -> Vec3;
}

impl<F: Fn(&Vec3) -> Vec3> TargetMap for F {
    fn map_point(&self, x: &Vec3) -> Vec3 {
        self(x)
    }
}

impl TargetMap for RigidTransform {
    fn map_point(&self, x: &Vec3) -> Vec3 {
        self.apply(x)
    }
}

/// `W(X) = T(X + u(X))`: the interpolated registration displacement followed
/// by a rigid transform into the observed frame.
#[derive(Debug, Clone)]
pub struct Warp {
    pub displacement: Option<DisplacementInterpolator>,
    pub rigid: RigidTransform,
}

impl Warp {
    pub fn identity() -> Self {
        Self {
            displacement: None,
            rigid: RigidTransform::identity(),
        }
    }

    pub fn rigid(rigid: RigidTransform) -> Self {
        Self {
            displacement: None,
            rigid,
        }
    }

    pub fn new(displacement: DisplacementInterpolator, rigid: RigidTransform) -> Self {
        Self {
            displacement: Some(displacement),
            rigid,
        }
    }
}

impl TargetMap for Warp {
    fn map_point(&self, x: &Vec3) -> Vec3 {
        let moved = match &self.displacement {
            Some(d) => x + d.interpolate(x),
            None => *x,
        };
        self.rigid.apply(&moved)
    }
}
