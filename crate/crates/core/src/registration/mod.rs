//! Force-driven registration of a volumetric mesh to a partial point cloud.
//!
//! The unknowns are nodal forces `f`; displacements follow from the
//! stabilized elastic model `u = K'⁻¹ f`, and the only objective is the
//! surface-matching term `J = ½‖C(x + u) − y‖²`. Each iteration rebuilds the
//! closest-point correspondences at `x + u`, takes a Nesterov momentum point,
//! and moves along the lagged gradient by the closed-form optimal step.
//!
//! The reference positions `x` are never modified.

mod config;
mod objective;
mod rigid;
mod solver;

pub use config::{EarlyStop, ForceMask, GradientPoint, Momentum, RegistrationConfig, StepMode};
pub use objective::{
    data_term, gradient, nesterov_point, optimal_step, project_onto_mask, residual, step_from_responses, ForceResponse,
    ZERO_CURVATURE,
};
pub use rigid::{procrustes, rigid_icp, IcpResult};
pub use solver::{
    register, trace_to_csv, write_trace_csv, Optimizer, OptimizerState, Registrar, RegistrationResult, StepOutcome,
    TraceRecord,
};
