use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticMaterial {
    youngs_modulus: f64,
    poisson_ratio: f64,
}

impl ElasticMaterial {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(Error::InvalidArgument(format!(
                "Poisson ratio must lie in [0, 0.5), got {poisson_ratio}"
            )));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
        })
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    /// First Lamé parameter, `E ν / ((1 + ν)(1 - 2ν))`.
    pub fn lame_lambda(&self) -> f64 {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// Shear modulus, `E / (2(1 + ν))`.
    pub fn lame_mu(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.youngs_modulus * factor, self.poisson_ratio)
    }
}

impl Default for ElasticMaterial {
    /// `E = 1`, `ν = 0.49`.
    fn default() -> Self {
        Self {
            youngs_modulus: 1.0,
            poisson_ratio: 0.49,
        }
    }
}
