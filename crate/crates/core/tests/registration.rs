mod common;

use std::f64::consts::PI;

use common::{
    dot, frozen_state, max_abs, patch_case, random_point, random_vec, rng, scan_argmin, surface_cloud, ScalarSpring,
};
use elastic_register::correspondence::{build_correspondences, Correspondence, CorrespondenceSet};
use elastic_register::evaluation::nodal_errors;
use elastic_register::fem::{ElasticMaterial, Stabilization, StiffnessSystem};
use elastic_register::geometry::{PointCloud, RigidTransform, Transformable, Vec3, VolumeMesh};
use elastic_register::registration::{
    data_term, gradient, nesterov_point, optimal_step, procrustes, register, residual, rigid_icp, ForceMask,
    ForceResponse, Momentum, Registrar, RegistrationConfig, StepMode, StepOutcome,
};
use elastic_register::synthesis::{liver_phantom, posterior_nodes};
use elastic_register::Error;
use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Quaternion, UnitQuaternion};
use proptest::prelude::*;
use rand::Rng;

fn small_mesh() -> VolumeMesh {
    let mesh = liver_phantom([6, 4, 3]).unwrap();
    assert!(mesh.num_nodes() <= 500);
    mesh
}

fn system(mesh: &VolumeMesh) -> StiffnessSystem {
    StiffnessSystem::build(mesh, &ElasticMaterial::default(), &Stabilization::soft_springs(0.01)).unwrap()
}

/// `C` as a dense matrix, built directly from the entries.
fn explicit_c(corr: &CorrespondenceSet) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(3 * corr.num_points(), 3 * corr.num_nodes());
    for (i, e) in corr.entries().iter().enumerate() {
        for (&node, &w) in e.nodes.iter().zip(&e.bary) {
            for d in 0..3 {
                c[(3 * i + d, 3 * node + d)] += w;
            }
        }
    }
    c
}

#[test]
fn data_term_examples() {
    let mesh = common::unit_tet();
    let zero = vec![0.0; 12];
    let on_surface = PointCloud::new(vec![Vec3::new(0.2, 0.3, 0.0), Vec3::new(0.0, 0.5, 0.5)]).unwrap();
    let corr = build_correspondences(mesh.surface(), mesh.nodes(), &on_surface).unwrap();
    assert!(data_term(&corr, mesh.nodes(), &zero, &on_surface).unwrap() < 1e-30);

    let d = 0.75;
    let single = PointCloud::new(vec![Vec3::new(0.2, 0.3, -d)]).unwrap();
    let corr = build_correspondences(mesh.surface(), mesh.nodes(), &single).unwrap();
    let j = data_term(&corr, mesh.nodes(), &zero, &single).unwrap();
    assert!((j - 0.5 * d * d).abs() < 1e-15);

    assert!(matches!(
        data_term(&corr, mesh.nodes(), &zero[..9], &single),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn data_term_matches_explicit_matrix() {
    let s = frozen_state(1);
    let c = explicit_c(&s.corr);
    let xu: Vec<f64> = s
        .x()
        .iter()
        .zip(s.u.chunks_exact(3))
        .flat_map(|(p, d)| [p.x + d[0], p.y + d[1], p.z + d[2]])
        .collect();
    let r = &c * DVector::from_vec(xu) - DVector::from_vec(s.case.cloud.to_flat());
    let expected = 0.5 * r.norm_squared();
    let j = data_term(&s.corr, s.x(), &s.u, &s.case.cloud).unwrap();
    assert!((j - expected).abs() <= 1e-12 * expected);
}

#[test]
fn gradient_matches_central_differences() {
    let s = frozen_state(2);
    let g = gradient(&s.sys, &s.corr, s.x(), &s.u, &s.case.cloud, None).unwrap();
    let mut r = rng(3);
    for _ in 0..20 {
        let d = random_vec(&mut r, s.f.len());
        let h = 1.0 / max_abs(&s.sys.solve_vec(&d).unwrap());
        let plus: Vec<f64> = s.f.iter().zip(&d).map(|(f, d)| f + h * d).collect();
        let minus: Vec<f64> = s.f.iter().zip(&d).map(|(f, d)| f - h * d).collect();
        let fd = (s.j_of_force(&plus) - s.j_of_force(&minus)) / (2.0 * h);
        let exact = dot(&g, &d);
        assert!((fd - exact).abs() < 1e-5 * exact.abs(), "fd {fd} vs {exact}");
    }
}

#[test]
fn zero_residual_gives_zero_gradient() {
    let mesh = small_mesh();
    let sys = system(&mesh);
    let mut r = rng(4);
    let u = sys.solve_vec(&random_vec(&mut r, mesh.num_dofs())).unwrap();
    let positions = mesh.deformed_nodes(&u);
    let cloud = surface_cloud(&mesh, &positions);
    let corr = build_correspondences(mesh.surface(), &positions, &cloud).unwrap();
    let g = gradient(&sys, &corr, mesh.nodes(), &u, &cloud, None).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn masked_gradient_lives_on_the_mask() {
    let s = frozen_state(5);
    let posterior = posterior_nodes(&s.case.mesh);
    let mut mask = vec![false; s.case.mesh.num_nodes()];
    posterior.iter().for_each(|&i| mask[i] = true);
    let g = gradient(&s.sys, &s.corr, s.x(), &s.u, &s.case.cloud, Some(&mask)).unwrap();
    for (i, chunk) in g.chunks_exact(3).enumerate() {
        if !mask[i] {
            assert!(chunk.iter().all(|&v| v == 0.0));
        }
    }
    assert!(posterior.iter().any(|&i| g[3 * i..3 * i + 3].iter().any(|&v| v != 0.0)));
}

#[test]
fn optimal_step_matches_line_scan() {
    for seed in 0..10 {
        let s = frozen_state(10 + seed);
        let mut r = rng(seed);
        let p: Vec<f64> = s.f.iter().map(|v| v * r.random_range(0.5..1.5)).collect();
        let g = gradient(&s.sys, &s.corr, s.x(), &s.u, &s.case.cloud, None).unwrap();
        let alpha = optimal_step(&s.sys, &s.corr, s.x(), &p, &s.case.cloud, &g).unwrap();
        let w_p = s.sys.solve_vec(&p).unwrap();
        let w_g = s.sys.solve_vec(&g).unwrap();
        let phi = |a: f64| {
            let u: Vec<f64> = w_p.iter().zip(&w_g).map(|(p, g)| p - a * g).collect();
            data_term(&s.corr, s.x(), &u, &s.case.cloud).unwrap()
        };
        let scanned = scan_argmin(phi);
        assert!(
            (alpha - scanned).abs() <= 1e-6 * alpha.abs(),
            "seed {seed}: {alpha} vs {scanned}"
        );
    }
}

#[test]
fn step_scales_inversely_with_gradient() {
    let s = frozen_state(30);
    let g = gradient(&s.sys, &s.corr, s.x(), &s.u, &s.case.cloud, None).unwrap();
    let alpha = optimal_step(&s.sys, &s.corr, s.x(), &s.f, &s.case.cloud, &g).unwrap();
    for c in [1e-3, 0.5, 7.0, 1e4] {
        let gc: Vec<f64> = g.iter().map(|v| c * v).collect();
        let ac = optimal_step(&s.sys, &s.corr, s.x(), &s.f, &s.case.cloud, &gc).unwrap();
        assert!((ac * c - alpha).abs() <= 1e-12 * alpha.abs());
    }
}

#[test]
fn zero_direction_is_zero_curvature() {
    let s = frozen_state(31);
    let g = vec![0.0; s.f.len()];
    assert!(matches!(
        optimal_step(&s.sys, &s.corr, s.x(), &s.f, &s.case.cloud, &g),
        Err(Error::ZeroCurvature { .. })
    ));
}

#[test]
fn scalar_analogue_converges_in_one_step() {
    let spring = ScalarSpring { kappa: 4.0 };
    let mut r = rng(32);
    for _ in 0..50 {
        let c = r.random_range(0.2..1.0);
        let entry = Correspondence {
            triangle: 0,
            nodes: [0, 0, 0],
            bary: [c, 0.0, 0.0],
            closest: Vec3::zeros(),
            distance: 0.0,
        };
        let corr = CorrespondenceSet::from_entries(vec![entry], 1).unwrap();
        let x = [random_point(&mut r, 10.0)];
        let y = PointCloud::new(vec![random_point(&mut r, 10.0)]).unwrap();
        let f0 = random_vec(&mut r, 3);
        let u0 = spring.displacement(&f0).unwrap();
        let g = gradient(&spring, &corr, &x, &u0, &y, None).unwrap();
        let alpha = optimal_step(&spring, &corr, &x, &f0, &y, &g).unwrap();
        let f1: Vec<f64> = f0.iter().zip(&g).map(|(f, g)| f - alpha * g).collect();
        let res = residual(&corr, &x, &spring.displacement(&f1).unwrap(), &y).unwrap();
        assert!(max_abs(&res) <= 1e-12 * 20.0, "{res:?}");
    }
}

#[test]
fn nesterov_examples() {
    let f0 = vec![1.0, 2.0, -3.0];
    assert_eq!(nesterov_point(&f0, &[5.0, 5.0, 5.0], 0), f0);
    let d = [0.4, -0.8, 2.0];
    let f1: Vec<f64> = f0.iter().zip(&d).map(|(a, b)| a + b).collect();
    let p = nesterov_point(&f1, &f0, 1);
    for i in 0..3 {
        assert!((p[i] - (f1[i] + d[i] / 4.0)).abs() < 1e-15);
    }
    let p = nesterov_point(&f1, &f0, 9);
    assert!((p[2] - (f1[2] + 0.75 * d[2])).abs() < 1e-15);
}

#[test]
fn without_momentum_the_step_starts_at_the_current_forces() {
    let mesh = small_mesh();
    let case = patch_case(&mesh, 0.5, 0.0, 33);
    let cfg = RegistrationConfig {
        momentum: Momentum::None,
        ..RegistrationConfig::default()
    };
    let reg = Registrar::new(&mesh, cfg).unwrap();
    let mut opt = reg.optimizer(&case.cloud);
    for _ in 0..5 {
        let before = opt.state().f_curr.clone();
        assert_eq!(opt.step().unwrap(), StepOutcome::Advanced);
        assert_eq!(opt.state().p, before);
    }
}

#[test]
fn identity_registration_stays_put() {
    let mesh = small_mesh();
    let cloud = surface_cloud(&mesh, mesh.nodes());
    let res = register(&mesh, &cloud, &RegistrationConfig::default()).unwrap();
    let diag = mesh.bbox_diagonal();
    assert!(res.final_mean_residual < 1e-6 * diag);
    assert!(res.u_final.max_norm() < 1e-4 * diag);
    assert!(res.stopped_early);
    assert_eq!(res.converged_iterations, 0);
}

#[test]
fn registration_is_deterministic() {
    let mesh = small_mesh();
    let case = patch_case(&mesh, 0.4, 1.0, 34);
    let cfg = RegistrationConfig {
        max_iters: 40,
        ..RegistrationConfig::default()
    };
    let a = register(&mesh, &case.cloud, &cfg).unwrap();
    let b = register(&mesh, &case.cloud, &cfg).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.u_final.as_slice()), bits(b.u_final.as_slice()));
    assert_eq!(a.trace.len(), b.trace.len());
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!(
            [x.j, x.alpha, x.grad_norm, x.mean_residual].map(f64::to_bits),
            [y.j, y.alpha, y.grad_norm, y.mean_residual].map(f64::to_bits)
        );
    }
}

#[test]
fn forces_stay_on_the_mask_every_iteration() {
    let mesh = small_mesh();
    let case = patch_case(&mesh, 0.5, 0.0, 35);
    let posterior = posterior_nodes(&mesh);
    let cfg = RegistrationConfig {
        force_mask: ForceMask::Nodes(posterior.clone()),
        ..RegistrationConfig::default()
    };
    let reg = Registrar::new(&mesh, cfg).unwrap();
    let mut opt = reg.optimizer(&case.cloud);
    for _ in 0..30 {
        if opt.step().unwrap() != StepOutcome::Advanced {
            break;
        }
        for (i, chunk) in opt.state().f_curr.chunks_exact(3).enumerate() {
            assert!(reg.mask()[i] == posterior.contains(&i));
            if !reg.mask()[i] {
                assert!(chunk.iter().all(|&v| v == 0.0));
            }
        }
    }
    assert!(opt.state().k > 0);
}

#[test]
fn pure_gradient_steps_do_not_increase_frozen_objective() {
    let mesh = small_mesh();
    let case = patch_case(&mesh, 0.5, 0.5, 36);
    let cfg = RegistrationConfig {
        momentum: Momentum::None,
        ..RegistrationConfig::default()
    };
    let reg = Registrar::new(&mesh, cfg).unwrap();
    let mut opt = reg.optimizer(&case.cloud);
    for _ in 0..30 {
        let u = opt.state().u.clone();
        let corr = build_correspondences(mesh.surface(), &mesh.deformed_nodes(&u), &case.cloud).unwrap();
        if opt.step().unwrap() != StepOutcome::Advanced {
            break;
        }
        let st = opt.state();
        let j_p = data_term(
            &corr,
            mesh.nodes(),
            &reg.system().solve_vec(&st.p).unwrap(),
            &case.cloud,
        )
        .unwrap();
        let j_next = data_term(&corr, mesh.nodes(), &st.u, &case.cloud).unwrap();
        assert!(j_next <= j_p + 1e-12 * j_p.max(1.0), "{j_next} > {j_p}");
    }
}

#[test]
fn fixed_step_mode_uses_the_given_step() {
    let mesh = small_mesh();
    let case = patch_case(&mesh, 0.5, 0.0, 37);
    let cfg = RegistrationConfig {
        step: StepMode::Fixed(0.25),
        max_iters: 3,
        ..RegistrationConfig::default()
    };
    let res = register(&mesh, &case.cloud, &cfg).unwrap();
    assert!(res.trace.iter().all(|t| t.alpha == 0.25));
}

#[test]
fn invalid_configurations_rejected() {
    let mesh = small_mesh();
    let bad = [
        RegistrationConfig {
            poisson_ratio: 0.5,
            ..RegistrationConfig::default()
        },
        RegistrationConfig {
            max_iters: 0,
            ..RegistrationConfig::default()
        },
        RegistrationConfig {
            force_mask: ForceMask::Nodes(vec![]),
            ..RegistrationConfig::default()
        },
        RegistrationConfig {
            force_mask: ForceMask::Nodes(vec![mesh.num_nodes()]),
            ..RegistrationConfig::default()
        },
        RegistrationConfig {
            step: StepMode::Fixed(-1.0),
            ..RegistrationConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(Registrar::new(&mesh, cfg), Err(Error::InvalidArgument(_))));
    }
}

/// Mean nodal error over a few half-visible cases for one Poisson ratio.
fn suite_error(mesh: &VolumeMesh, nu: f64) -> f64 {
    let cfg = RegistrationConfig {
        poisson_ratio: nu,
        max_iters: 100,
        ..RegistrationConfig::default()
    };
    let reg = Registrar::new(mesh, cfg).unwrap();
    let errs: Vec<f64> = (0..4)
        .map(|seed| {
            let case = patch_case(mesh, 0.5, 0.0, 40 + seed);
            let res = reg.run(&case.cloud).unwrap();
            nodal_errors(&res.u_final, &case.true_u).unwrap().summary.mean
        })
        .collect();
    errs.iter().sum::<f64>() / errs.len() as f64
}

#[test]
fn poisson_ratio_sensitivity_is_bounded() {
    let mesh = liver_phantom([8, 5, 4]).unwrap();
    let a = suite_error(&mesh, 0.45);
    let b = suite_error(&mesh, 0.49);
    assert!((a - b).abs() < 0.15 * a.max(b), "ν=0.45: {a}, ν=0.49: {b}");
}

/// Horn's closed-form absolute orientation via the unit quaternion that
/// maximizes `qᵀ N q`.
fn horn(source: &[Vec3], target: &[Vec3]) -> (Matrix3<f64>, Vec3) {
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;
    let mut m = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        m += (s - cs) * (t - ct).transpose();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let nm = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = nm.symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(k);
    let rot = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner();
    (rot, ct - rot * cs)
}

fn random_rigid<R: Rng>(r: &mut R, max_angle: f64, max_shift: f64) -> RigidTransform {
    RigidTransform::from_axis_angle(
        random_point(r, 1.0),
        r.random_range(-max_angle..max_angle),
        random_point(r, max_shift),
    )
}

#[test]
fn procrustes_recovers_exact_motion() {
    let mut r = rng(50);
    for _ in 0..20 {
        let src: Vec<Vec3> = (0..30).map(|_| random_point(&mut r, 50.0)).collect();
        let t = random_rigid(&mut r, PI, 100.0);
        let est = procrustes(&src, &src.transformed(&t)).unwrap();
        assert!((est.rotation() - t.rotation()).abs().max() < 1e-10);
        assert!((est.translation() - t.translation()).norm() < 1e-10 * 100.0);
    }
}

#[test]
fn procrustes_never_reflects() {
    let mut r = rng(51);
    let src: Vec<Vec3> = (0..20).map(|_| random_point(&mut r, 10.0)).collect();
    let mirrored: Vec<Vec3> = src.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
    let est = procrustes(&src, &mirrored).unwrap();
    assert!((est.rotation().determinant() - 1.0).abs() < 1e-12);
}

#[test]
fn procrustes_agrees_with_quaternion_method_under_noise() {
    let mut r = rng(52);
    for _ in 0..20 {
        let src: Vec<Vec3> = (0..40).map(|_| random_point(&mut r, 50.0)).collect();
        let t = random_rigid(&mut r, PI, 100.0);
        let tgt: Vec<Vec3> = src.iter().map(|p| t.apply(p) + random_point(&mut r, 2.0)).collect();
        let est = procrustes(&src, &tgt).unwrap();
        let (rot, shift) = horn(&src, &tgt);
        assert!((est.rotation() - rot).abs().max() < 1e-9);
        assert!((est.translation() - shift).norm() < 1e-8);
        let rms = |f: &dyn Fn(&Vec3) -> Vec3| {
            (src.iter()
                .zip(&tgt)
                .map(|(s, t)| (f(s) - t).norm_squared())
                .sum::<f64>()
                / src.len() as f64)
                .sqrt()
        };
        let a = rms(&|p| est.apply(p));
        let b = rms(&|p| rot * p + shift);
        assert!((a - b).abs() < 1e-10 * b);
    }
}

#[test]
fn procrustes_rejects_degenerate_input() {
    let line: Vec<Vec3> = (0..5).map(|i| Vec3::x() * i as f64).collect();
    assert!(matches!(
        procrustes(&line, &line),
        Err(Error::DegenerateConfiguration(_))
    ));
    let two = [Vec3::x(), Vec3::y()];
    assert!(matches!(procrustes(&two, &two), Err(Error::DegenerateConfiguration(_))));
}

fn phantom_surface_cloud(cells: [usize; 3]) -> PointCloud {
    let mesh = liver_phantom(cells).unwrap();
    surface_cloud(&mesh, mesh.nodes())
}

#[test]
fn icp_recovers_known_motion() {
    let target = phantom_surface_cloud([10, 6, 5]);
    let t = RigidTransform::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 6f64.to_radians(), Vec3::new(4.0, -3.0, 2.0));
    let source = target.transformed(&t.inverse());
    let res = rigid_icp(&source, &target, 100, 1e-12).unwrap();
    let err = res.transform.compose(&t.inverse());
    assert!(err.angle() < 1e-6);
    assert!(err.translation().norm() < 1e-6);
    assert!(res.rms < 1e-6);
}

#[test]
fn icp_of_identical_clouds_is_identity() {
    let cloud = phantom_surface_cloud([6, 4, 3]);
    let res = rigid_icp(&cloud, &cloud, 20, 1e-9).unwrap();
    assert!(res.transform.angle() < 1e-12);
    assert!(res.transform.translation().norm() < 1e-9);
    assert_eq!(res.rms, 0.0);
}

#[test]
fn icp_on_noisy_half_subset() {
    let sigma = 0.5;
    let target = phantom_surface_cloud([24, 14, 10]);
    let mut r = rng(53);
    let t = RigidTransform::from_axis_angle(Vec3::new(0.0, 1.0, 1.0), 4f64.to_radians(), Vec3::new(2.0, 1.0, -2.0));
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    let subset: Vec<Vec3> = target
        .points()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0)
        .map(|(_, p)| {
            let noise = Vec3::from_fn(|_, _| r.sample(normal));
            t.inverse().apply(&(p + noise))
        })
        .collect();
    let res = rigid_icp(&PointCloud::new(subset).unwrap(), &target, 100, 1e-9).unwrap();
    assert!(res.rms <= 2.0 * sigma, "rms {}", res.rms);
}

#[test]
fn icp_needs_three_points() {
    let two = PointCloud::new(vec![Vec3::x(), Vec3::y()]).unwrap();
    assert!(matches!(
        rigid_icp(&two, &two, 10, 1e-6),
        Err(Error::DegenerateConfiguration(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn procrustes_rotation_is_proper(pts in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 3..30), seed in any::<u64>()) {
        let src: Vec<Vec3> = pts.into_iter().map(Vec3::from).collect();
        let mut r = rng(seed);
        let tgt: Vec<Vec3> = src.iter().map(|_| random_point(&mut r, 50.0)).collect();
        if let Ok(t) = procrustes(&src, &tgt) {
            prop_assert!((t.rotation().determinant() - 1.0).abs() < 1e-9);
            prop_assert!((t.rotation().transpose() * t.rotation() - Matrix3::identity()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn optimal_step_is_homogeneous(seed in 0u64..50, c in 1e-3f64..1e3) {
        let s = frozen_state(seed);
        let g = gradient(&s.sys, &s.corr, s.x(), &s.u, &s.case.cloud, None).unwrap();
        let a = optimal_step(&s.sys, &s.corr, s.x(), &s.f, &s.case.cloud, &g).unwrap();
        let gc: Vec<f64> = g.iter().map(|v| c * v).collect();
        let ac = optimal_step(&s.sys, &s.corr, s.x(), &s.f, &s.case.cloud, &gc).unwrap();
        prop_assert!((ac * c - a).abs() <= 1e-10 * a.abs());
    }
}
