use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::BlurModelKind;

/// Weights, step sizes and iteration budgets of the alternating solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Data-term weight.
    pub lambda1: f64,
    /// Mask total-variation weight.
    pub lambda2: f64,
    /// Mask binary-prior weight.
    pub lambda3: f64,
    /// Dual step of the mask primal-dual iteration.
    pub sigma_d: f64,
    /// Primal step of the mask primal-dual iteration.
    pub sigma_a: f64,
    /// Proximity denominator in the mask primal update.
    pub tau: f64,
    /// Exponent of the sparse gradient prior on the layers.
    pub hyper_exponent: f64,
    /// Half-quadratic coupling weights, in sweep order. Empty disables the
    /// layer prior and reduces the latent step to least squares.
    pub beta_schedule: Vec<f64>,
    pub cg_max_iter: usize,
    pub cg_rel_tol: f64,
    pub pd_iterations: usize,
    /// Objective evaluations per Nelder-Mead block.
    pub nm_max_evals: usize,
    pub inner_iterations: usize,
    /// Generative model used by the data term.
    pub model: BlurModelKind,
}

impl SolverConfig {
    /// Defaults for a sequence of `frames` frames: `λ1 = 2500 / N`,
    /// `λ2 = 0.055 λ1`, `λ3 = λ1 / 20000`.
    pub fn for_frames(frames: usize) -> Self {
        let lambda1 = 2500.0 / frames.max(1) as f64;
        let sigma_a = 0.0125;
        Self {
            lambda1,
            lambda2: 0.055 * lambda1,
            lambda3: lambda1 / 20000.0,
            sigma_d: 10.0,
            sigma_a,
            tau: sigma_a,
            hyper_exponent: 0.8,
            beta_schedule: (0..9).map(|k| f64::powi(2.0, k)).collect(),
            cg_max_iter: 25,
            cg_rel_tol: 1e-4,
            pd_iterations: 20,
            nm_max_evals: 100,
            inner_iterations: 3,
            model: BlurModelKind::Proposed,
        }
    }

    pub fn prior_enabled(&self) -> bool {
        !self.beta_schedule.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("sigma_d", self.sigma_d),
            ("sigma_a", self.sigma_a),
            ("tau", self.tau),
            ("cg_rel_tol", self.cg_rel_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        // λ3 = 0 switches the binary prior off
        if !(self.lambda3 >= 0.0 && self.lambda3.is_finite()) {
            return Err(Error::Config(format!("lambda3 must be non-negative, got {}", self.lambda3)));
        }
        if !(self.hyper_exponent > 0.0 && self.hyper_exponent <= 1.0) {
            return Err(Error::Config(format!(
                "hyper_exponent must lie in (0, 1], got {}",
                self.hyper_exponent
            )));
        }
        if self.beta_schedule.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::Config("beta_schedule entries must be positive".into()));
        }
        if self.cg_max_iter == 0 || self.nm_max_evals == 0 || self.inner_iterations == 0 {
            return Err(Error::Config("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}
