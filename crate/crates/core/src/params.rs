use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the model: the domain is `[-ell, ell)`, agents
/// interact within radius `radius`, and `sigma` scales the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    ell: f64,
    radius: f64,
    sigma: f64,
}

impl Params {
    pub fn new(ell: f64, radius: f64, sigma: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParams(format!("ell must be positive, got {ell}")));
        }
        if !(radius.is_finite() && radius > 0.0 && radius < ell) {
            return Err(Error::InvalidParams(format!(
                "radius must satisfy 0 < radius < ell = {ell}, got {radius}"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParams(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { ell, radius, sigma })
    }

    /// Same as [`Params::new`] but takes the noise variance `sigma^2`.
    pub fn with_sigma2(ell: f64, radius: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::InvalidParams(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        Self::new(ell, radius, sigma2.sqrt())
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Diffusion coefficient `sigma^2 / 2`.
    pub fn diffusivity(&self) -> f64 {
        0.5 * self.sigma2()
    }

    /// Level of the spatially uniform probability density, `1 / (2 ell)`.
    pub fn uniform_level(&self) -> f64 {
        1.0 / (2.0 * self.ell)
    }
}
