//! Alpha mask estimation by a primal-dual iteration.
//!
//! Dual step: `D ← (D + σ_D ∇Ā) / max(1, |D + σ_D ∇Ā|)` with the per-pixel
//! Euclidean norm. Primal step: minimize
//! `λ2 ||A − (A_m − σ_A ∇ᵀD)||² / (2τ) + λ1 ||∇B_A − ∇K_A A||² + λ3 Aᵀ(1 − A)`
//! by conjugate gradient, then clamp to `[0, 1]` and extrapolate
//! `Ā ← 2 A_new − A_m`.

use super::cg::{conjugate_gradient, CgFailure};
use super::config::SolverConfig;
use super::objective::{binary_penalty, data_term, stack_frames, Grid};
use crate::error::{Error, Result};
use crate::gradient::{gradient_adjoint_into, gradient_into};
use crate::image::ImageBuffer;
use crate::model::MaskOperator;
use crate::scene::Scene;

/// Projects each dual vector `(dx, dy)` onto the unit disk.
pub fn project_dual(dx: &mut [f64], dy: &mut [f64]) {
    for (x, y) in dx.iter_mut().zip(dy.iter_mut()) {
        let norm = (*x * *x + *y * *y).sqrt();
        if norm > 1.0 {
            *x /= norm;
            *y /= norm;
        }
    }
}

struct MaskProblem<'a> {
    grid: Grid,
    op: MaskOperator,
    // B_A: frames minus the mask-independent render
    target: Vec<f64>,
    config: &'a SolverConfig,
}

impl MaskProblem<'_> {
    fn energy(&self, alpha: &[f64]) -> f64 {
        let mut rendered = vec![0.0; self.op.output_len()];
        self.op.apply(alpha, &mut rendered);
        data_term(&self.grid, &self.target, &rendered, self.config.lambda1)
            + self.config.lambda2 * self.grid.with_channels(1).total_variation(alpha)
            + self.config.lambda3 * binary_penalty(alpha)
    }
}

/// Updates the mask for fixed layers and motions. Returns the lowest-energy
/// iterate, or the input mask if no iterate improves on it.
pub fn solve_alpha(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<ImageBuffer> {
    config.validate()?;
    let observed = stack_frames(scene, frames)?;
    let op = MaskOperator::all_frames(scene, config.model)?;
    let target: Vec<f64> = observed.iter().zip(op.offset()).map(|(b, o)| b - o).collect();
    let problem = MaskProblem {
        grid: Grid::of(scene),
        op,
        target,
        config,
    };
    let (w, h) = (scene.width(), scene.height());
    let n = w * h;

    let prox_weight = config.lambda2 / config.tau;
    let diag = prox_weight - 2.0 * config.lambda3;
    if diag <= 0.0 {
        return Err(Error::Config(format!(
            "mask primal system is indefinite (lambda2/tau - 2 lambda3 = {diag:.3e}); reduce lambda3"
        )));
    }
    let data_weight = 2.0 * config.lambda1;

    // 2λ1 K_Aᵀ ∇ᵀ∇ B_A − λ3
    let mut lap_b = vec![0.0; problem.target.len()];
    problem.grid.laplacian(&problem.target, &mut lap_b);
    let mut rhs_data = vec![0.0; n];
    problem.op.apply_adjoint(&lap_b, &mut rhs_data);
    rhs_data.iter_mut().for_each(|v| *v = data_weight * *v - config.lambda3);

    let mut forward = vec![0.0; problem.op.output_len()];
    let mut lap_fwd = vec![0.0; problem.op.output_len()];
    let mut normal = |x: &[f64], y: &mut [f64]| {
        problem.op.apply(x, &mut forward);
        problem.grid.laplacian(&forward, &mut lap_fwd);
        problem.op.apply_adjoint(&lap_fwd, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = data_weight * *yi + diag * xi;
        }
    };

    let initial = scene.alpha.data().to_vec();
    let initial_energy = problem.energy(&initial);
    let mut best = initial.clone();
    let mut best_energy = initial_energy;

    let mut alpha = initial.clone();
    let mut extrapolated = initial;
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for _ in 0..config.pd_iterations {
        gradient_into(&extrapolated, w, h, 1, &mut gx, &mut gy);
        for i in 0..n {
            dx[i] += config.sigma_d * gx[i];
            dy[i] += config.sigma_d * gy[i];
        }
        project_dual(&mut dx, &mut dy);

        gradient_adjoint_into(&dx, &dy, w, h, 1, &mut div);
        for i in 0..n {
            let anchor = alpha[i] - config.sigma_a * div[i];
            rhs[i] = prox_weight * anchor + rhs_data[i];
        }
        let mut next = alpha.clone();
        conjugate_gradient(&mut normal, &rhs, &mut next, config.cg_max_iter, config.cg_rel_tol).map_err(
            |f| match f {
                CgFailure::NonFinite => Error::Numeric("mask CG produced a non-finite residual".into()),
                CgFailure::Indefinite { curvature } => Error::Config(format!(
                    "mask primal system is indefinite (curvature {curvature:.3e}); reduce lambda3"
                )),
            },
        )?;
        next.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        for i in 0..n {
            extrapolated[i] = 2.0 * next[i] - alpha[i];
        }
        alpha = next;

        let e = problem.energy(&alpha);
        if !e.is_finite() {
            return Err(Error::Numeric("mask energy is not finite".into()));
        }
        if e < best_energy {
            best_energy = e;
            best.copy_from_slice(&alpha);
        }
    }
    if best_energy >= initial_energy {
        log::debug!("mask step kept input: {best_energy:.6e} >= {initial_energy:.6e}");
    }
    ImageBuffer::from_vec(w, h, 1, best)
}
