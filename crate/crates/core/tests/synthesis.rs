mod common;

use std::collections::HashSet;

use common::{max_abs, patch_case, patch_spec};
use elastic_register::correspondence::build_correspondences;
use elastic_register::evaluation::nodal_errors;
use elastic_register::fem::{PenaltyConstraint, Stabilization, StiffnessSystem};
use elastic_register::geometry::{PointCloud, Transformable, Vec3, VolumeMesh};
use elastic_register::registration::{register, rigid_icp, RegistrationConfig};
use elastic_register::synthesis::{
    default_phantom, generate_case, liver_phantom, perturb_rigid, reference_spec, CaseSpec, SyntheticCase,
    CASE_TRUTH_FILE, REFERENCE_PEAK_DISPLACEMENT,
};
use elastic_register::Error;
use proptest::prelude::*;
use tempfile::TempDir;

fn coarse() -> VolumeMesh {
    liver_phantom([8, 5, 4]).unwrap()
}

/// Distance from every cloud point to the true deformed surface.
fn distances_to_true_surface(case: &SyntheticCase) -> Vec<f64> {
    let deformed = case.mesh.deformed_nodes(case.true_u.as_slice());
    let corr = build_correspondences(case.mesh.surface(), &deformed, &case.cloud).unwrap();
    corr.entries().iter().map(|e| e.distance).collect()
}

#[test]
fn zero_forces_sample_the_undeformed_surface() {
    let mesh = coarse();
    let case = generate_case(&mesh, &CaseSpec::default()).unwrap();
    assert!(case.true_u.as_slice().iter().all(|&v| v == 0.0));
    assert!(case.true_forces.support().is_empty());
    assert_eq!(case.cloud.len(), mesh.surface().num_nodes());
    for (p, &i) in case.cloud.points().iter().zip(&case.cloud_nodes) {
        assert_eq!(*p, mesh.nodes()[i]);
    }
}

#[test]
fn reference_load_case_matches_expected_size() {
    let mesh = default_phantom().unwrap();
    assert_eq!(mesh.num_nodes(), 4290);
    let case = generate_case(&mesh, &reference_spec(&mesh)).unwrap();
    let m = case.cloud.len() as f64;
    assert!((m - 934.0).abs() <= 93.4, "m = {m}");
    assert!((case.true_u.max_norm() - REFERENCE_PEAK_DISPLACEMENT).abs() < 1e-9);
    // The load points along -z only.
    for i in case.true_forces.support() {
        let f = &case.true_forces.as_slice()[3 * i..3 * i + 3];
        assert!(f[0] == 0.0 && f[1] == 0.0 && f[2] < 0.0);
    }
    let fixed = case.true_fixed_nodes.as_ref().unwrap();
    assert!(fixed.iter().all(|&i| case.true_u.node(i).norm() < 1e-3));
}

#[test]
fn noise_level_matches_sigma() {
    let mesh = default_phantom().unwrap();
    let case = patch_case(&mesh, 1.0, 2.0, 7);
    assert!(case.cloud.len() >= 1000);
    let d = distances_to_true_surface(&case);
    let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
    assert!((1.8..=2.2).contains(&rms), "rms {rms}");
    assert!(d.iter().all(|&v| v <= 4.0 * 2.0));
}

#[test]
fn noiseless_cloud_lies_on_true_surface() {
    let mesh = coarse();
    let case = patch_case(&mesh, 0.4, 0.0, 8);
    assert!(distances_to_true_surface(&case).iter().all(|&v| v < 1e-9));
    assert!(case.visibility_ratio >= 0.4);
}

#[test]
fn true_displacements_solve_the_forward_model() {
    let mesh = coarse();
    let case = patch_case(&mesh, 0.5, 0.0, 9);
    let sys = StiffnessSystem::build(&mesh, &case.spec.material, &Stabilization::soft_springs(case.spec.k_ss)).unwrap();
    let u = sys.solve_vec(case.true_forces.as_slice()).unwrap();
    let diff: Vec<f64> = u.iter().zip(case.true_u.as_slice()).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) <= 1e-9 * case.true_u.max_norm());

    let spec = CaseSpec {
        fixed_nodes: Some(vec![0, 1, 2, 3]),
        ..patch_spec(&mesh, 0.5, 0.0, 9)
    };
    let pinned = generate_case(&mesh, &spec).unwrap();
    let stab = Stabilization {
        k_ss: 0.0,
        scaling: Default::default(),
        penalty: Some(PenaltyConstraint::new(vec![0, 1, 2, 3])),
    };
    let sys = StiffnessSystem::build(&mesh, &spec.material, &stab).unwrap();
    let u = sys.solve_vec(pinned.true_forces.as_slice()).unwrap();
    let diff: Vec<f64> = u.iter().zip(pinned.true_u.as_slice()).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) <= 1e-9 * pinned.true_u.max_norm());
}

#[test]
fn identical_seeds_give_identical_cases() {
    let mesh = coarse();
    let a = patch_case(&mesh, 0.3, 2.0, 10);
    let b = patch_case(&mesh, 0.3, 2.0, 10);
    assert_eq!(a, b);
    let c = patch_case(&mesh, 0.3, 2.0, 11);
    assert_ne!(a.cloud, c.cloud);

    let tmp = TempDir::new().unwrap();
    a.save(tmp.path().join("a")).unwrap();
    b.save(tmp.path().join("b")).unwrap();
    for file in ["mesh.tet", "cloud.xyz", CASE_TRUTH_FILE] {
        let x = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn saved_case_loads_back() {
    let mesh = coarse();
    let case = perturb_rigid(&patch_case(&mesh, 0.6, 1.0, 12), 5.0, 3.0, 12);
    let tmp = TempDir::new().unwrap();
    case.save(tmp.path()).unwrap();
    let back = SyntheticCase::load(tmp.path()).unwrap();
    assert_eq!(back.true_u, case.true_u);
    assert_eq!(back.true_forces, case.true_forces);
    assert_eq!(back.cloud_nodes, case.cloud_nodes);
    assert_eq!(back.spec, case.spec);
    assert_eq!(back.rigid_perturbation, case.rigid_perturbation);
    for (p, q) in back.cloud.points().iter().zip(case.cloud.points()) {
        assert!((p - q).norm() < 1e-9 * q.norm().max(1.0));
    }
}

#[test]
fn invalid_specs_rejected() {
    let mesh = coarse();
    for (visibility, noise_sigma) in [(0.0, 0.0), (1.5, 0.0), (0.5, -1.0), (0.5, f64::NAN)] {
        let spec = CaseSpec {
            visibility,
            noise_sigma,
            ..CaseSpec::default()
        };
        assert!(matches!(generate_case(&mesh, &spec), Err(Error::InvalidArgument(_))));
    }
}

#[test]
fn zero_rigid_bounds_leave_cloud_unchanged() {
    let case = patch_case(&coarse(), 0.5, 0.0, 13);
    let same = perturb_rigid(&case, 0.0, 0.0, 99);
    for (p, q) in same.cloud.points().iter().zip(case.cloud.points()) {
        assert!((p - q).norm() < 1e-12 * q.norm().max(1.0));
    }
}

#[test]
fn perturbed_centroid_stays_within_translation_bound() {
    let case = patch_case(&coarse(), 0.5, 0.0, 14);
    for seed in 0..50 {
        let moved = perturb_rigid(&case, 10.0, 10.0, seed);
        let t = moved.rigid_perturbation.unwrap();
        assert!(t.angle() <= 10f64.to_radians() + 1e-12);
        assert!((moved.cloud.centroid() - case.cloud.centroid()).norm() <= 10.0 + 1e-9);
        assert_eq!(moved.cloud, case.cloud.transformed(&t));
    }
}

/// Undeformed surface sampled on a barycentric grid inside every triangle,
/// dense enough for point-to-point ICP.
fn dense_surface(mesh: &VolumeMesh, steps: usize) -> PointCloud {
    let x = mesh.nodes();
    let mut pts = Vec::new();
    for t in mesh.surface().triangles() {
        for i in 0..=steps {
            for j in 0..=steps - i {
                let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                pts.push(x[t[0]] * (1.0 - a - b) + x[t[1]] * a + x[t[2]] * b);
            }
        }
    }
    PointCloud::new(pts).unwrap()
}

/// Rigid ICP onto the undeformed surface followed by elastic registration;
/// returns the mean nodal error against the truth.
fn align_and_register(mesh: &VolumeMesh, target: &PointCloud, cloud: &PointCloud, truth: &SyntheticCase) -> f64 {
    let icp = rigid_icp(cloud, target, 100, 1e-9).unwrap();
    let res = register(mesh, &cloud.transformed(&icp.transform), &RegistrationConfig::default()).unwrap();
    nodal_errors(&res.u_final, &truth.true_u).unwrap().summary.mean
}

#[test]
fn registration_after_perturbation_and_icp_stays_close() {
    let mesh = coarse();
    let target = dense_surface(&mesh, 8);
    for seed in 0..3 {
        let case = patch_case(&mesh, 0.5, 0.0, 20 + seed);
        let base = align_and_register(&mesh, &target, &case.cloud, &case);
        let moved = perturb_rigid(&case, 5.0, 5.0, seed);
        let err = align_and_register(&mesh, &target, &moved.cloud, &case);
        assert!(err <= 1.25 * base, "seed {seed}: {err} vs {base}");
    }
}

#[test]
fn full_noiseless_case_is_recovered() {
    let mesh = coarse();
    for seed in 0..3 {
        let case = patch_case(&mesh, 1.0, 0.0, 30 + seed);
        let res = register(&mesh, &case.cloud, &RegistrationConfig::default()).unwrap();
        let err = nodal_errors(&res.u_final, &case.true_u).unwrap().summary.mean;
        let rel = err / case.true_u.mean_norm();
        assert!(rel < 0.02, "seed {seed}: relative error {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cloud_is_a_surface_subset_within_noise(seed in any::<u64>(), visibility in 0.05f64..1.0, sigma in 0.0f64..3.0) {
        let mesh = liver_phantom([6, 4, 3]).unwrap();
        let case = patch_case(&mesh, visibility, sigma, seed);
        let surface: HashSet<usize> = mesh.surface().node_indices().iter().copied().collect();
        prop_assert!(case.cloud_nodes.iter().all(|i| surface.contains(i)));
        prop_assert_eq!(case.cloud_nodes.len(), case.cloud.len());
        prop_assert!(case.visibility_ratio >= visibility - 1e-12);
        let deformed = mesh.deformed_nodes(case.true_u.as_slice());
        for (p, &i) in case.cloud.points().iter().zip(&case.cloud_nodes) {
            let offset: Vec3 = p - deformed[i];
            prop_assert!(offset.amax() <= 6.0 * sigma + 1e-9);
        }
    }
}
