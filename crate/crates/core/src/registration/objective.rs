//! Pieces of one optimizer iteration, each usable on its own.
//!
//! With correspondences frozen, the objective as a function of the forces is
//!
//! ```text
//! J(f) = ½ ‖C (x + K'⁻¹ f) − y‖²
//! ```
//!
//! whose gradient is `K'⁻ᵀ Cᵀ (C(x + u) − y)` and whose exact minimizer along
//! a direction `g` from a point `p` has the closed form in [`optimal_step`].

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::fem::StiffnessSystem;
use crate::geometry::{PointCloud, Vec3};

/// Below this, `‖C K'⁻¹ g‖²` is treated as zero.
pub const ZERO_CURVATURE: f64 = 1e-30;

/// Linear force-to-displacement map `u = K'⁻¹ f` and its adjoint.
pub trait ForceResponse {
    fn num_dofs(&self) -> usize;
    fn displacement(&self, f: &[f64]) -> Result<Vec<f64>>;
    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>>;
}

impl ForceResponse for StiffnessSystem {
    fn num_dofs(&self) -> usize {
        StiffnessSystem::num_dofs(self)
    }

    fn displacement(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.solve_vec(f)
    }

    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.solve_adjoint(r)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `C(x + u) − y` as a flat `3m` vector.
pub fn residual(corr: &CorrespondenceSet, x: &[Vec3], u: &[f64], y: &PointCloud) -> Result<Vec<f64>> {
    check_len(corr.num_nodes(), x.len())?;
    check_len(3 * x.len(), u.len())?;
    check_len(corr.num_points(), y.len())?;
    let deformed: Vec<f64> = x
        .iter()
        .zip(u.chunks_exact(3))
        .flat_map(|(p, d)| [p.x + d[0], p.y + d[1], p.z + d[2]])
        .collect();
    let mut r = corr.apply_c(&deformed)?;
    for (ri, yi) in r.chunks_exact_mut(3).zip(y.points()) {
        ri[0] -= yi.x;
        ri[1] -= yi.y;
        ri[2] -= yi.z;
    }
    Ok(r)
}

/// `J = ½ ‖C(x + u) − y‖²` in mm².
pub fn data_term(corr: &CorrespondenceSet, x: &[Vec3], u: &[f64], y: &PointCloud) -> Result<f64> {
    let r = residual(corr, x, u, y)?;
    Ok(0.5 * r.iter().map(|v| v * v).sum::<f64>())
}

/// Zeroes the three entries of every node outside `mask`.
pub fn project_onto_mask(v: &mut [f64], mask: &[bool]) {
    for (chunk, &keep) in v.chunks_exact_mut(3).zip(mask) {
        if !keep {
            chunk.fill(0.0);
        }
    }
}

/// Lagged gradient `K'⁻ᵀ Cᵀ (C(x + u) − y)` with `C` held fixed, projected
/// onto the nodes allowed to carry force.
pub fn gradient<S: ForceResponse + ?Sized>(
    system: &S,
    corr: &CorrespondenceSet,
    x: &[Vec3],
    u_lagged: &[f64],
    y: &PointCloud,
    mask: Option<&[bool]>,
) -> Result<Vec<f64>> {
    check_len(system.num_dofs(), u_lagged.len())?;
    let r = residual(corr, x, u_lagged, y)?;
    let mut g = system.adjoint(&corr.apply_ct(&r)?)?;
    if let Some(mask) = mask {
        check_len(x.len(), mask.len())?;
        project_onto_mask(&mut g, mask);
    }
    Ok(g)
}

/// Step minimizing `½‖C(x + K'⁻¹(p − α g)) − y‖²` over `α`:
///
/// ```text
/// α = (C K'⁻¹ g)ᵀ (C(x + K'⁻¹ p) − y) / ‖C K'⁻¹ g‖²
/// ```
pub fn optimal_step<S: ForceResponse + ?Sized>(
    system: &S,
    corr: &CorrespondenceSet,
    x: &[Vec3],
    p: &[f64],
    y: &PointCloud,
    g: &[f64],
) -> Result<f64> {
    check_len(system.num_dofs(), p.len())?;
    check_len(system.num_dofs(), g.len())?;
    let w_g = system.displacement(g)?;
    let w_p = system.displacement(p)?;
    step_from_responses(corr, x, &w_p, y, &w_g)
}

/// [`optimal_step`] given the responses `w_p = K'⁻¹ p` and `w_g = K'⁻¹ g`.
pub fn step_from_responses(
    corr: &CorrespondenceSet,
    x: &[Vec3],
    w_p: &[f64],
    y: &PointCloud,
    w_g: &[f64],
) -> Result<f64> {
    let cw_g = corr.apply_c(w_g)?;
    let r_p = residual(corr, x, w_p, y)?;
    let curvature: f64 = cw_g.iter().map(|v| v * v).sum();
    if !(curvature >= ZERO_CURVATURE) {
        return Err(Error::ZeroCurvature { curvature });
    }
    let slope: f64 = cw_g.iter().zip(&r_p).map(|(a, b)| a * b).sum();
    let alpha = slope / curvature;
    if !alpha.is_finite() {
        return Err(Error::ZeroCurvature { curvature });
    }
    Ok(alpha)
}

/// Momentum point `p^k = f^k + k/(k+3) (f^k − f^{k−1})`.
pub fn nesterov_point(f_curr: &[f64], f_prev: &[f64], k: usize) -> Vec<f64> {
    debug_assert_eq!(f_curr.len(), f_prev.len());
    let beta = k as f64 / (k as f64 + 3.0);
    f_curr.iter().zip(f_prev).map(|(&c, &p)| c + beta * (c - p)).collect()
}
