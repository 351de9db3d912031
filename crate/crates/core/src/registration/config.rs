use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{PenaltyConstraint, SpringScaling};

/// Which nodes may carry force.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMask {
    /// Every boundary-surface node.
    #[default]
    Surface,
    /// Every mesh node, interior included.
    AllNodes,
    /// An explicit node list.
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// Closed-form minimizer along the gradient with correspondences frozen.
    #[default]
    Optimal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    #[default]
    Nesterov,
    None,
}

/// Where the lagged gradient is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientPoint {
    /// At `u(f^k)`, with the correspondences already built for this
    /// iteration.
    #[default]
    Current,
    /// At `u(p^k)`, re-solving and re-matching at the momentum point.
    Momentum,
}

/// Stop when the relative change of `J` stays below `rel_tol` for `window`
/// consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStop {
    pub rel_tol: f64,
    pub window: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            window: 10,
        }
    }
}

/// Registration parameters. Defaults: `k_ss = 0.01`, `ν = 0.49`, `E = 1`,
/// 200 iterations, forces on the whole surface, optimal step with Nesterov
/// momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationConfig {
    pub k_ss: f64,
    pub spring_scaling: SpringScaling,
    pub poisson_ratio: f64,
    pub youngs_modulus: f64,
    pub max_iters: usize,
    pub force_mask: ForceMask,
    pub fixed_nodes: Option<PenaltyConstraint>,
    pub step: StepMode,
    pub momentum: Momentum,
    pub gradient_point: GradientPoint,
    pub early_stop: Option<EarlyStop>,
    pub rng_seed: u64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            k_ss: 0.01,
            spring_scaling: SpringScaling::Absolute,
            poisson_ratio: 0.49,
            youngs_modulus: 1.0,
            max_iters: 200,
            force_mask: ForceMask::Surface,
            fixed_nodes: None,
            step: StepMode::Optimal,
            momentum: Momentum::Nesterov,
            gradient_point: GradientPoint::Current,
            early_stop: None,
            rng_seed: 0,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return bad(format!(
                "poisson_ratio must lie in [0, 0.5), got {}",
                self.poisson_ratio
            ));
        }
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return bad(format!("youngs_modulus must be positive, got {}", self.youngs_modulus));
        }
        if !(self.k_ss >= 0.0 && self.k_ss.is_finite()) {
            return bad(format!("k_ss must be non-negative, got {}", self.k_ss));
        }
        if let StepMode::Fixed(a) = self.step {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("fixed step must be positive, got {a}"));
            }
        }
        if let Some(es) = &self.early_stop {
            if es.window == 0 || !(es.rel_tol >= 0.0) {
                return bad("early_stop needs window >= 1 and rel_tol >= 0".into());
            }
        }
        Ok(())
    }
}
