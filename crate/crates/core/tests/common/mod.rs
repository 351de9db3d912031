#![allow(dead_code)]

use elastic_register::correspondence::{build_correspondences, CorrespondenceSet};
use elastic_register::fem::{ElasticMaterial, Stabilization, StiffnessSystem};
use elastic_register::geometry::{PointCloud, Vec3, VolumeMesh};
use elastic_register::registration::{data_term, ForceResponse};
use elastic_register::synthesis::{box_mesh, generate_case, CaseSpec, CropSeed, ForceSpec, SyntheticCase};
use elastic_register::Result;
use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_tet() -> VolumeMesh {
    VolumeMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()], vec![[0, 1, 2, 3]]).unwrap()
}

/// Two tets sharing the face `(1, 2, 3)`.
pub fn two_tets() -> VolumeMesh {
    VolumeMesh::new(
        vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), Vec3::repeat(1.0)],
        vec![[0, 1, 2, 3], [4, 1, 3, 2]],
    )
    .unwrap()
}

/// Box mesh whose interior nodes are moved by up to `amp` of a cell along
/// each axis, so elements are no longer congruent.
pub fn jittered_box(cells: [usize; 3], size: Vec3, amp: f64, seed: u64) -> VolumeMesh {
    let mesh = box_mesh(cells, size).unwrap();
    let mut r = rng(seed);
    let h = Vec3::new(
        size.x / cells[0] as f64,
        size.y / cells[1] as f64,
        size.z / cells[2] as f64,
    );
    let on_surface: std::collections::HashSet<usize> = mesh.surface().node_indices().iter().copied().collect();
    let nodes = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if on_surface.contains(&i) {
                *p
            } else {
                let d = Vec3::new(
                    r.random_range(-amp..amp),
                    r.random_range(-amp..amp),
                    r.random_range(-amp..amp),
                );
                p + d.component_mul(&h)
            }
        })
        .collect();
    mesh.with_nodes(nodes).unwrap()
}

/// Three inward surface patch loads peaking at 6% of the bounding-box
/// diagonal, cropped around a random surface node.
pub fn patch_spec(mesh: &VolumeMesh, visibility: f64, noise_sigma: f64, seed: u64) -> CaseSpec {
    let diag = mesh.bbox_diagonal();
    CaseSpec {
        forces: ForceSpec::RandomPatches {
            count: 3,
            radius: 0.15 * diag,
            magnitude: 1.0,
            inward: true,
        },
        visibility,
        noise_sigma,
        seed,
        peak_displacement: Some(0.06 * diag),
        crop_seed: CropSeed::RandomSurfaceNode,
        ..CaseSpec::default()
    }
}

pub fn patch_case(mesh: &VolumeMesh, visibility: f64, noise_sigma: f64, seed: u64) -> SyntheticCase {
    generate_case(mesh, &patch_spec(mesh, visibility, noise_sigma, seed)).unwrap()
}

pub fn surface_cloud(mesh: &VolumeMesh, positions: &[Vec3]) -> PointCloud {
    PointCloud::new(mesh.surface().node_indices().iter().map(|&i| positions[i]).collect()).unwrap()
}

pub fn random_vec<R: Rng>(r: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn random_point<R: Rng>(r: &mut R, scale: f64) -> Vec3 {
    Vec3::new(
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
    )
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Element stiffness by four-point Gauss quadrature of the bilinear form
/// `∫ λ div φ_a div φ_b + 2μ ε(φ_a):ε(φ_b)`, with shape-function gradients
/// taken by central differences of the barycentric map. Shares no code with
/// the library element.
pub fn quadrature_element(x: &[Vec3; 4], youngs: f64, nu: f64) -> nalgebra::DMatrix<f64> {
    use nalgebra::Matrix3;
    let lambda = youngs * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = youngs / (2.0 * (1.0 + nu));
    let jac = Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
    let inv = jac.try_inverse().expect("non-degenerate tet");
    let bary = |p: &Vec3| {
        let s = inv * (p - x[0]);
        [1.0 - s.x - s.y - s.z, s.x, s.y, s.z]
    };
    let volume = jac.determinant().abs() / 6.0;
    let h = 1e-2 * (x[1] - x[0]).norm();
    let (a, b) = (0.5854101966249685, 0.1381966011250105);
    let mut k = nalgebra::DMatrix::zeros(12, 12);
    for q in 0..4 {
        let mut w = [b; 4];
        w[q] = a;
        let p = x[0] * w[0] + x[1] * w[1] + x[2] * w[2] + x[3] * w[3];
        let mut g = [Vec3::zeros(); 4];
        for d in 0..3 {
            let mut e = Vec3::zeros();
            e[d] = h;
            let (np, nm) = (bary(&(p + e)), bary(&(p - e)));
            for n in 0..4 {
                g[n][d] = (np[n] - nm[n]) / (2.0 * h);
            }
        }
        for na in 0..4 {
            for nb in 0..4 {
                for i in 0..3 {
                    for j in 0..3 {
                        let delta = if i == j { g[na].dot(&g[nb]) } else { 0.0 };
                        let v = lambda * g[na][i] * g[nb][j] + mu * (delta + g[na][j] * g[nb][i]);
                        k[(3 * na + i, 3 * nb + j)] += volume / 4.0 * v;
                    }
                }
            }
        }
    }
    k
}

/// Largest relative deviation of the element strains from `strain` when the
/// surface nodes are pinned by penalty springs to the affine field
/// `u(x) = shift + grad·x` and the interior is solved for.
pub fn patch_test_error(mesh: &VolumeMesh, grad: &nalgebra::Matrix3<f64>, shift: &Vec3) -> f64 {
    use elastic_register::fem::{
        assemble, element_strains, ElasticMaterial, PenaltyConstraint, Stabilization, StiffnessSystem,
    };
    use elastic_register::geometry::DisplacementField;
    let boundary = mesh.surface().node_indices().to_vec();
    let stab = Stabilization {
        k_ss: 0.0,
        scaling: Default::default(),
        penalty: Some(PenaltyConstraint::new(boundary.clone())),
    };
    let material = ElasticMaterial::new(1.0, 0.49).unwrap();
    let system = StiffnessSystem::new(&assemble(mesh, &material).unwrap(), &stab).unwrap();
    let k = system.penalty_stiffness();
    let mut f = vec![0.0; mesh.num_dofs()];
    for &i in &boundary {
        let u = shift + grad * mesh.nodes()[i];
        for d in 0..3 {
            f[3 * i + d] = k * u[d];
        }
    }
    let u = DisplacementField::from_flat(system.solve_vec(&f).unwrap()).unwrap();
    let target = (grad + grad.transpose()) * 0.5;
    element_strains(mesh, &u)
        .unwrap()
        .iter()
        .map(|e| (e - target).norm() / target.norm())
        .fold(0.0, f64::max)
}

/// Distance from `p` to segment `ab`.
pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum of the interior projection (when it falls inside) and the three
/// edge distances. Uses the normal equations rather than Voronoi regions.
pub fn oracle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (e1, e2, d) = (b - a, c - a, p - a);
    let g = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
    let mut best = segment_distance(p, a, b)
        .min(segment_distance(p, b, c))
        .min(segment_distance(p, c, a));
    if let Some(st) = g.lu().solve(&Vector2::new(d.dot(&e1), d.dot(&e2))) {
        if st[0] >= 0.0 && st[1] >= 0.0 && st[0] + st[1] <= 1.0 {
            best = best.min((p - (a + e1 * st[0] + e2 * st[1])).norm());
        }
    }
    best
}

/// Closest distance to any of `tris`, by exhaustive search.
pub fn brute_force_distance(positions: &[Vec3], tris: &[[usize; 3]], p: &Vec3) -> f64 {
    tris.iter()
        .map(|t| oracle_distance(p, &positions[t[0]], &positions[t[1]], &positions[t[2]]))
        .fold(f64::INFINITY, f64::min)
}

/// Phantom surface with randomly displaced nodes, at most 200 triangles.
pub fn small_deformed_surface(seed: u64) -> (VolumeMesh, Vec<Vec3>) {
    let mesh = elastic_register::synthesis::liver_phantom([4, 3, 2]).unwrap();
    assert!(mesh.surface().triangles().len() <= 200);
    let mut r = rng(seed);
    let positions = mesh.nodes().iter().map(|p| p + random_point(&mut r, 3.0)).collect();
    (mesh, positions)
}

/// A half-visible case together with correspondences frozen at a random
/// deformed state `u = K'⁻¹ f`.
pub struct Frozen {
    pub case: SyntheticCase,
    pub sys: StiffnessSystem,
    pub f: Vec<f64>,
    pub u: Vec<f64>,
    pub corr: CorrespondenceSet,
}

pub fn frozen_state(seed: u64) -> Frozen {
    let mesh = elastic_register::synthesis::liver_phantom([6, 4, 3]).unwrap();
    let case = patch_case(&mesh, 0.5, 0.5, seed);
    let sys = StiffnessSystem::build(&mesh, &ElasticMaterial::default(), &Stabilization::soft_springs(0.01)).unwrap();
    let mut r = rng(seed + 1000);
    let mut f = random_vec(&mut r, mesh.num_dofs());
    let scale = 3.0 / max_abs(&sys.solve_vec(&f).unwrap());
    f.iter_mut().for_each(|v| *v *= scale);
    let u = sys.solve_vec(&f).unwrap();
    let corr = build_correspondences(mesh.surface(), &mesh.deformed_nodes(&u), &case.cloud).unwrap();
    Frozen { case, sys, f, u, corr }
}

impl Frozen {
    pub fn x(&self) -> &[Vec3] {
        self.case.mesh.nodes()
    }

    pub fn j_of_force(&self, f: &[f64]) -> f64 {
        let u = self.sys.solve_vec(f).unwrap();
        data_term(&self.corr, self.x(), &u, &self.case.cloud).unwrap()
    }
}

/// Minimizer of `φ` from a dense scan, refined by the parabola through the
/// best grid point and its two neighbours (exact for a quadratic).
pub fn scan_argmin(phi: impl Fn(f64) -> f64) -> f64 {
    let f0 = phi(0.0);
    let mut s = 1e-12;
    while phi(s) <= f0 || phi(-s) <= f0 {
        s *= 2.0;
    }
    const N: usize = 20_001;
    let h = 2.0 * s / (N - 1) as f64;
    let grid: Vec<f64> = (0..N).map(|i| -s + h * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&a| phi(a)).collect();
    let i = (1..N - 1).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (y0, y1, y2) = (vals[i - 1], vals[i], vals[i + 1]);
    grid[i] + 0.5 * h * (y0 - y2) / (y0 - 2.0 * y1 + y2)
}

/// One node on isotropic springs of stiffness `kappa`: `u = f / κ`.
pub struct ScalarSpring {
    pub kappa: f64,
}

impl ForceResponse for ScalarSpring {
    fn num_dofs(&self) -> usize {
        3
    }

    fn displacement(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(f.iter().map(|v| v / self.kappa).collect())
    }

    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.displacement(r)
    }
}
