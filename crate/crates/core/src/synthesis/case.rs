use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use super::forces::{extreme_surface_point, ForceSpec};
use crate::error::{Error, Result};
use crate::fem::{ElasticMaterial, ForceField, PenaltyConstraint, Stabilization, StiffnessSystem};
use crate::geometry::{
    crop_surface, io, DisplacementField, MeshFormat, PointCloud, RigidTransform, Transformable, Vec3, VolumeMesh,
};

// Independent random streams so changing one ingredient leaves the others
// untouched.
const STREAM_FORCES: u64 = 1;
const STREAM_CROP: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_RIGID: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Where the visible patch is grown from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropSeed {
    Point(Vec3),
    /// The deformed surface point furthest along this direction.
    Extreme(Vec3),
    /// A seeded random surface node.
    RandomSurfaceNode,
}

/// Recipe for one ground-truthed case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseSpec {
    pub forces: ForceSpec,
    /// Fraction of deformed surface area kept in the cloud, in `(0, 1]`.
    pub visibility: f64,
    /// Per-coordinate Gaussian noise standard deviation in mm.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Nodes held at zero displacement in the forward model. When set, the
    /// forward model is `K` plus these penalty springs only.
    pub fixed_nodes: Option<Vec<usize>>,
    /// Soft-spring constant of the forward model when no nodes are fixed.
    pub k_ss: f64,
    pub material: ElasticMaterial,
    /// Rescales the forces so the largest nodal displacement equals this.
    pub peak_displacement: Option<f64>,
    pub crop_seed: CropSeed,
}

impl Default for CaseSpec {
    fn default() -> Self {
        Self {
            forces: ForceSpec::Zero,
            visibility: 1.0,
            noise_sigma: 0.0,
            seed: 0,
            fixed_nodes: None,
            k_ss: 0.01,
            material: ElasticMaterial::default(),
            peak_displacement: None,
            crop_seed: CropSeed::Extreme(Vec3::z()),
        }
    }
}

/// A registration problem with known answer.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub mesh: VolumeMesh,
    pub true_forces: ForceField,
    pub true_u: DisplacementField,
    pub cloud: PointCloud,
    /// Volume node behind each cloud point (before noise).
    pub cloud_nodes: Vec<usize>,
    pub visibility_ratio: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    pub true_fixed_nodes: Option<Vec<usize>>,
    /// Rigid motion applied to the cloud after cropping, if any.
    pub rigid_perturbation: Option<RigidTransform>,
    pub spec: CaseSpec,
}

/// Forward-simulates `spec` on `mesh`, crops the deformed surface and adds
/// noise. Identical inputs give bit-identical cases.
pub fn generate_case(mesh: &VolumeMesh, spec: &CaseSpec) -> Result<SyntheticCase> {
    if !(spec.visibility > 0.0 && spec.visibility <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "visibility must lie in (0, 1], got {}",
            spec.visibility
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be non-negative, got {}",
            spec.noise_sigma
        )));
    }
    let mut forces = spec
        .forces
        .build(mesh, &mut rng(spec.seed, STREAM_FORCES))?
        .into_inner();
    let (true_u, forces) = if forces.iter().all(|&v| v == 0.0) {
        (vec![0.0; mesh.num_dofs()], forces)
    } else {
        let stab = match &spec.fixed_nodes {
            Some(nodes) => Stabilization {
                k_ss: 0.0,
                scaling: Default::default(),
                penalty: Some(PenaltyConstraint::new(nodes.clone())),
            },
            None => Stabilization::soft_springs(spec.k_ss),
        };
        let system = StiffnessSystem::build(mesh, &spec.material, &stab)?;
        let mut u = system.solve_vec(&forces)?;
        if let Some(peak) = spec.peak_displacement {
            let current = u
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]).norm())
                .fold(0.0, f64::max);
            if !(current > 0.0) {
                return Err(Error::DegenerateConfiguration("forces produce no displacement".into()));
            }
            let s = peak / current;
            u.iter_mut().for_each(|v| *v *= s);
            forces.iter_mut().for_each(|v| *v *= s);
        }
        (u, forces)
    };

    let deformed = mesh.deformed_nodes(&true_u);
    let seed_point = match &spec.crop_seed {
        CropSeed::Point(p) => *p,
        CropSeed::Extreme(dir) => extreme_surface_point(mesh, &deformed, dir),
        CropSeed::RandomSurfaceNode => {
            let surface = mesh.surface().node_indices();
            deformed[surface[rng(spec.seed, STREAM_CROP).random_range(0..surface.len())]]
        }
    };
    let crop = crop_surface(mesh.surface(), &deformed, &seed_point, spec.visibility)?;

    let mut points = crop.cloud.points().to_vec();
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        let mut r = rng(spec.seed, STREAM_NOISE);
        for p in &mut points {
            for d in 0..3 {
                p[d] += normal.sample(&mut r);
            }
        }
    }

    Ok(SyntheticCase {
        mesh: mesh.clone(),
        true_forces: ForceField::from_flat(forces)?,
        true_u: DisplacementField::from_flat(true_u)?,
        cloud: PointCloud::new(points)?,
        cloud_nodes: crop.node_indices,
        visibility_ratio: crop.achieved_ratio,
        noise_sigma: spec.noise_sigma,
        rng_seed: spec.seed,
        true_fixed_nodes: spec.fixed_nodes.clone(),
        rigid_perturbation: None,
        spec: spec.clone(),
    })
}

/// Moves the cloud by a random rigid motion about its centroid: a rotation
/// of at most `max_angle_deg` about a uniform random axis, then a
/// translation of at most `max_trans` mm in a uniform random direction.
pub fn perturb_rigid(case: &SyntheticCase, max_angle_deg: f64, max_trans: f64, seed: u64) -> SyntheticCase {
    let mut r = rng(seed, STREAM_RIGID);
    let axis: [f64; 3] = UnitSphere.sample(&mut r);
    let angle = max_angle_deg.max(0.0).to_radians() * r.random::<f64>();
    let dir: [f64; 3] = UnitSphere.sample(&mut r);
    let shift = Vec3::from(dir) * (max_trans.max(0.0) * r.random::<f64>());
    let c = case.cloud.centroid();
    let rot = RigidTransform::from_axis_angle(Vec3::from(axis), angle, Vec3::zeros());
    // p ↦ R(p − c) + c + shift
    let t = RigidTransform::from_axis_angle(Vec3::from(axis), angle, c - rot.apply(&c) + shift);
    let mut out = case.clone();
    out.cloud = case.cloud.transformed(&t);
    out.rigid_perturbation = Some(match &case.rigid_perturbation {
        Some(prev) => t.compose(prev),
        None => t,
    });
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Truth {
    spec: CaseSpec,
    visibility_ratio: f64,
    num_points: usize,
    cloud_nodes: Vec<usize>,
    rigid_perturbation: Option<RigidTransform>,
    true_fixed_nodes: Option<Vec<usize>>,
    true_forces: Vec<f64>,
    true_u: Vec<f64>,
}

pub const CASE_MESH_FILE: &str = "mesh.tet";
pub const CASE_CLOUD_FILE: &str = "cloud.xyz";
pub const CASE_TRUTH_FILE: &str = "truth.json";

impl SyntheticCase {
    /// Writes `mesh.tet`, `cloud.xyz` and `truth.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::save_volume_mesh(dir.join(CASE_MESH_FILE), &self.mesh, MeshFormat::Native)?;
        io::save_point_cloud(dir.join(CASE_CLOUD_FILE), &self.cloud)?;
        let truth = Truth {
            spec: self.spec.clone(),
            visibility_ratio: self.visibility_ratio,
            num_points: self.cloud.len(),
            cloud_nodes: self.cloud_nodes.clone(),
            rigid_perturbation: self.rigid_perturbation,
            true_fixed_nodes: self.true_fixed_nodes.clone(),
            true_forces: self.true_forces.as_slice().to_vec(),
            true_u: self.true_u.as_slice().to_vec(),
        };
        let path = dir.join(CASE_TRUTH_FILE);
        let text = serde_json::to_string_pretty(&truth).map_err(|e| Error::parse("truth.json", e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mesh = io::load_volume_mesh(dir.join(CASE_MESH_FILE))?;
        let cloud = io::load_point_cloud(dir.join(CASE_CLOUD_FILE))?;
        let path = dir.join(CASE_TRUTH_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let truth: Truth = serde_json::from_str(&text).map_err(|e| Error::parse("truth.json", e.to_string()))?;
        if truth.num_points != cloud.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.num_points,
                actual: cloud.len(),
            });
        }
        let true_u = DisplacementField::from_flat(truth.true_u)?;
        if true_u.num_nodes() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_nodes(),
                actual: true_u.num_nodes(),
            });
        }
        Ok(Self {
            mesh,
            true_forces: ForceField::from_flat(truth.true_forces)?,
            true_u,
            cloud,
            cloud_nodes: truth.cloud_nodes,
            visibility_ratio: truth.visibility_ratio,
            noise_sigma: truth.spec.noise_sigma,
            rng_seed: truth.spec.seed,
            true_fixed_nodes: truth.true_fixed_nodes,
            rigid_perturbation: truth.rigid_perturbation,
            spec: truth.spec,
        })
    }
}
