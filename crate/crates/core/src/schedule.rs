//! The μ-annealing schedule and stopping rule shared by both solvers.

use serde::{Deserialize, Serialize};

use crate::error::{IrlsError, Result};
use crate::linalg::{max_abs, spectral_norm, DenseMatrix};

/// Smoothing schedule `μ₀ = μ_c·‖X‖₂`, `μ_{t+1} = max(μ_t/ρ, μ_floor)`, and
/// the `‖Z_{t+1} − Z_t‖_∞ ≤ ε` stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingSchedule {
    pub mu_c: f64,
    /// Absolute `μ₀`; overrides `mu_c` when set.
    pub mu_init: Option<f64>,
    pub rho: f64,
    /// Defaults to `1e-8·‖X‖₂`.
    pub mu_floor: Option<f64>,
    /// Defaults to `1e-5·max(1, ‖X‖_∞)`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
}

impl Default for SmoothingSchedule {
    fn default() -> Self {
        SmoothingSchedule {
            mu_c: 0.1,
            mu_init: None,
            rho: 1.1,
            mu_floor: None,
            epsilon: None,
            max_iter: 1000,
        }
    }
}

/// Schedule with every data-dependent default filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSchedule {
    pub mu0: f64,
    pub rho: f64,
    pub mu_floor: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl SmoothingSchedule {
    /// Fixed-μ schedule: `ρ = 1`, `μ ≡ mu`.
    pub fn fixed(mu: f64) -> Self {
        SmoothingSchedule {
            mu_init: Some(mu),
            rho: 1.0,
            mu_floor: Some(0.0),
            ..Default::default()
        }
    }

    pub fn resolve(&self, x: &DenseMatrix) -> Result<ResolvedSchedule> {
        if x.is_empty() {
            return Err(IrlsError::EmptyMatrix);
        }
        let norm2 = spectral_norm(x)?;
        // an all-zero X still needs a positive smoothing scale
        let scale = if norm2 > 0.0 { norm2 } else { 1.0 };
        let mu0 = match self.mu_init {
            Some(mu) => mu,
            None => {
                if !(self.mu_c.is_finite() && self.mu_c > 0.0) {
                    return Err(IrlsError::InvalidParams(format!("mu_c must be positive, got {}", self.mu_c)));
                }
                self.mu_c * scale
            }
        };
        if !(mu0.is_finite() && mu0 > 0.0) {
            return Err(IrlsError::NonPositiveMu(mu0));
        }
        if !(self.rho.is_finite() && self.rho >= 1.0) {
            return Err(IrlsError::InvalidParams(format!("rho must be >= 1, got {}", self.rho)));
        }
        let mu_floor = self.mu_floor.unwrap_or(1e-8 * scale);
        if !(mu_floor >= 0.0 && mu_floor < mu0) {
            return Err(IrlsError::InvalidParams(format!(
                "mu_floor {mu_floor} must lie in [0, mu0 = {mu0})"
            )));
        }
        let epsilon = self.epsilon.unwrap_or(1e-5 * max_abs(x).max(1.0));
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(IrlsError::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
        }
        if self.max_iter == 0 {
            return Err(IrlsError::InvalidParams("max_iter must be at least 1".into()));
        }
        Ok(ResolvedSchedule {
            mu0,
            rho: self.rho,
            mu_floor,
            epsilon,
            max_iter: self.max_iter,
        })
    }
}

impl ResolvedSchedule {
    pub fn next_mu(&self, mu: f64) -> f64 {
        (mu / self.rho).max(self.mu_floor)
    }
}
