use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{ForceMask, GradientPoint, Momentum, RegistrationConfig, StepMode};
use super::objective::{data_term, gradient, nesterov_point, project_onto_mask, step_from_responses};
use crate::correspondence::build_correspondences;
use crate::error::{Error, Result};
use crate::fem::{ElasticMaterial, ForceField, Stabilization, StiffnessSystem};
use crate::geometry::{DisplacementField, PointCloud, VolumeMesh};

/// One row of the optimizer trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Data term at `u(f^k)` with the correspondences of iteration `k`.
    pub j: f64,
    pub alpha: f64,
    pub grad_norm: f64,
    /// Mean closest-point distance at `u(f^k)`.
    pub mean_residual: f64,
}

/// `iter,J,alpha,grad_norm,mean_residual` rows.
pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from("iter,J,alpha,grad_norm,mean_residual\n");
    for t in trace {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            t.iter, t.j, t.alpha, t.grad_norm, t.mean_residual
        );
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_to_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Mutable state of the accelerated force iteration.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub k: usize,
    pub f_curr: Vec<f64>,
    pub f_prev: Vec<f64>,
    /// Momentum point of the last completed iteration.
    pub p: Vec<f64>,
    /// `K'⁻¹ f_curr`.
    pub u: Vec<f64>,
    /// `K'⁻¹ f_prev`.
    pub u_prev: Vec<f64>,
    pub alpha: f64,
    pub j: f64,
    pub trace: Vec<TraceRecord>,
}

/// Why [`Optimizer::step`] stopped advancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Advanced,
    /// The projected gradient vanished; the iterate is stationary.
    ZeroGradient,
    /// The gradient lies in the nullspace of `C K'⁻¹`; no step can reduce `J`.
    ZeroCurvature,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub u_final: DisplacementField,
    pub f_final: ForceField,
    pub trace: Vec<TraceRecord>,
    /// Number of force updates performed.
    pub converged_iterations: usize,
    /// Whether the loop ended before `max_iters` (stationary point or early stop).
    pub stopped_early: bool,
    /// Data term at `u_final` with freshly built correspondences.
    pub final_j: f64,
    pub final_mean_residual: f64,
    pub wall_time: Duration,
}

/// Assembled and factorized problem for one mesh and configuration, reusable
/// across point clouds.
#[derive(Debug, Clone)]
pub struct Registrar<'m> {
    mesh: &'m VolumeMesh,
    config: RegistrationConfig,
    system: Arc<StiffnessSystem>,
    mask: Vec<bool>,
}

impl<'m> Registrar<'m> {
    pub fn new(mesh: &'m VolumeMesh, config: RegistrationConfig) -> Result<Self> {
        config.validate()?;
        let material = ElasticMaterial::new(config.youngs_modulus, config.poisson_ratio)?;
        let stab = Stabilization {
            k_ss: config.k_ss,
            scaling: config.spring_scaling,
            penalty: config.fixed_nodes.clone(),
        };
        let system = StiffnessSystem::build(mesh, &material, &stab)?;
        Self::with_system(mesh, config, Arc::new(system))
    }

    /// Uses an already factorized system, which must belong to `mesh`. The
    /// material, spring and penalty settings of `config` are then ignored.
    pub fn with_system(mesh: &'m VolumeMesh, config: RegistrationConfig, system: Arc<StiffnessSystem>) -> Result<Self> {
        config.validate()?;
        if !system.is_for(mesh) {
            return Err(Error::InvalidArgument(
                "stiffness system was built for a different mesh".into(),
            ));
        }
        let mask = force_mask(mesh, &config.force_mask)?;
        Ok(Self {
            mesh,
            config,
            system,
            mask,
        })
    }

    pub fn system(&self) -> &Arc<StiffnessSystem> {
        &self.system
    }

    pub fn config(&self) -> &RegistrationConfig {
        &self.config
    }

    /// Per-node flags: may this node carry force?
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn optimizer<'a>(&'a self, cloud: &'a PointCloud) -> Optimizer<'a> {
        let n = self.mesh.num_dofs();
        Optimizer {
            registrar: self,
            cloud,
            state: OptimizerState {
                k: 0,
                f_curr: vec![0.0; n],
                f_prev: vec![0.0; n],
                p: vec![0.0; n],
                u: vec![0.0; n],
                u_prev: vec![0.0; n],
                alpha: 0.0,
                j: f64::NAN,
                trace: Vec::new(),
            },
            done: None,
        }
    }

    pub fn run(&self, cloud: &PointCloud) -> Result<RegistrationResult> {
        let start = Instant::now();
        let mut opt = self.optimizer(cloud);
        let mut stopped_early = false;
        while opt.state.k < self.config.max_iters {
            if opt.step()? != StepOutcome::Advanced {
                stopped_early = true;
                break;
            }
            if self.early_stop_reached(&opt.state.trace) {
                stopped_early = true;
                break;
            }
        }
        let OptimizerState { k, f_curr, trace, .. } = opt.state;
        let u = self.system.solve_vec(&f_curr)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { iteration: k, trace });
        }
        let positions = self.mesh.deformed_nodes(&u);
        let corr = build_correspondences(self.mesh.surface(), &positions, cloud)?;
        let final_j = data_term(&corr, self.mesh.nodes(), &u, cloud)?;
        Ok(RegistrationResult {
            u_final: DisplacementField::from_flat(u)?,
            f_final: ForceField::from_flat(f_curr)?,
            trace,
            converged_iterations: k,
            stopped_early,
            final_j,
            final_mean_residual: corr.mean_distance(),
            wall_time: start.elapsed(),
        })
    }

    fn early_stop_reached(&self, trace: &[TraceRecord]) -> bool {
        let Some(es) = self.config.early_stop else {
            return false;
        };
        if trace.len() <= es.window {
            return false;
        }
        trace[trace.len() - es.window - 1..].windows(2).all(|w| {
            let scale = w[0].j.abs().max(f64::MIN_POSITIVE);
            (w[0].j - w[1].j).abs() / scale < es.rel_tol
        })
    }
}

/// Runs the full registration of `cloud` onto `mesh`.
pub fn register(mesh: &VolumeMesh, cloud: &PointCloud, config: &RegistrationConfig) -> Result<RegistrationResult> {
    Registrar::new(mesh, config.clone())?.run(cloud)
}

fn force_mask(mesh: &VolumeMesh, mask: &ForceMask) -> Result<Vec<bool>> {
    let n = mesh.num_nodes();
    let mut flags = vec![false; n];
    match mask {
        ForceMask::AllNodes => flags.fill(true),
        ForceMask::Surface => {
            for &i in mesh.surface().node_indices() {
                flags[i] = true;
            }
        }
        ForceMask::Nodes(nodes) => {
            if nodes.is_empty() {
                return Err(Error::InvalidArgument("force mask node list is empty".into()));
            }
            for &i in nodes {
                if i >= n {
                    return Err(Error::InvalidArgument(format!("force mask node {i} out of range")));
                }
                flags[i] = true;
            }
        }
    }
    Ok(flags)
}

/// Steps the force iteration one update at a time.
pub struct Optimizer<'a> {
    registrar: &'a Registrar<'a>,
    cloud: &'a PointCloud,
    state: OptimizerState,
    done: Option<StepOutcome>,
}

impl Optimizer<'_> {
    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Performs iteration `k`: match, momentum, gradient, step.
    ///
    /// Displacements are carried along by linearity: `K'⁻¹ p^k` is the same
    /// momentum combination of `u^k` and `u^{k-1}`, and
    /// `u^{k+1} = K'⁻¹ p^k − α K'⁻¹ g`, so each iteration costs two solves.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if let Some(outcome) = self.done {
            return Ok(outcome);
        }
        let reg = self.registrar;
        let mesh = reg.mesh;
        let x = mesh.nodes();
        let k = self.state.k;

        let u = &self.state.u;
        self.ensure_finite(u)?;
        let corr = build_correspondences(mesh.surface(), &mesh.deformed_nodes(u), self.cloud)?;
        let j = data_term(&corr, x, u, self.cloud)?;
        let mean_residual = corr.mean_distance();

        let (p, w_p) = match reg.config.momentum {
            Momentum::Nesterov => (
                nesterov_point(&self.state.f_curr, &self.state.f_prev, k),
                nesterov_point(u, &self.state.u_prev, k),
            ),
            Momentum::None => (self.state.f_curr.clone(), u.clone()),
        };
        self.ensure_finite(&w_p)?;

        let corr = match reg.config.gradient_point {
            GradientPoint::Current => corr,
            GradientPoint::Momentum => build_correspondences(mesh.surface(), &mesh.deformed_nodes(&w_p), self.cloud)?,
        };
        let u_grad = match reg.config.gradient_point {
            GradientPoint::Current => u,
            GradientPoint::Momentum => &w_p,
        };
        let g = gradient(reg.system.as_ref(), &corr, x, u_grad, self.cloud, Some(&reg.mask))?;
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.ensure_finite(&g)?;

        self.state.j = j;
        let record = |alpha| TraceRecord {
            iter: k,
            j,
            alpha,
            grad_norm,
            mean_residual,
        };

        if grad_norm == 0.0 {
            self.state.trace.push(record(0.0));
            self.done = Some(StepOutcome::ZeroGradient);
            return Ok(StepOutcome::ZeroGradient);
        }

        let w_g = reg.system.solve_vec(&g)?;
        let alpha = match reg.config.step {
            StepMode::Fixed(a) => a,
            StepMode::Optimal => match step_from_responses(&corr, x, &w_p, self.cloud, &w_g) {
                Ok(a) => a,
                Err(Error::ZeroCurvature { .. }) => {
                    self.state.trace.push(record(0.0));
                    self.done = Some(StepOutcome::ZeroCurvature);
                    return Ok(StepOutcome::ZeroCurvature);
                }
                Err(e) => return Err(e),
            },
        };

        let mut f_next: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi - alpha * gi).collect();
        // Off-mask entries of p and g are already zero; this keeps them exactly so.
        project_onto_mask(&mut f_next, &reg.mask);
        let u_next: Vec<f64> = w_p.iter().zip(&w_g).map(|(wp, wg)| wp - alpha * wg).collect();
        self.state.trace.push(record(alpha));
        self.ensure_finite(&f_next)?;
        self.ensure_finite(&u_next)?;

        self.state.alpha = alpha;
        self.state.f_prev = std::mem::replace(&mut self.state.f_curr, f_next);
        self.state.u_prev = std::mem::replace(&mut self.state.u, u_next);
        self.state.p = p;
        self.state.k = k + 1;
        Ok(StepOutcome::Advanced)
    }

    fn ensure_finite(&self, v: &[f64]) -> Result<()> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteState {
                iteration: self.state.k,
                trace: self.state.trace.clone(),
            })
        }
    }

    pub fn into_state(self) -> OptimizerState {
        self.state
    }
}
