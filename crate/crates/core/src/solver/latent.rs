//! Latent layer estimation: gradient-domain deconvolution of both layers
//! with a sparse gradient prior, by half-quadratic splitting.

use super::cg::{conjugate_gradient, CgFailure};
use super::config::SolverConfig;
use super::objective::{data_term, stack_frames, Grid};
use super::prox::ProxLut;
use crate::error::{Error, Result};
use crate::gradient::{gradient_adjoint_into, gradient_into};
use crate::image::ImageBuffer;
use crate::model::{stack_layers, LayerOperator};
use crate::scene::Scene;

fn cg_error(f: CgFailure) -> Error {
    match f {
        CgFailure::NonFinite => Error::Numeric("latent CG produced a non-finite residual".into()),
        CgFailure::Indefinite { curvature } => {
            Error::Numeric(format!("latent CG met non-positive curvature {curvature:e}"))
        }
    }
}

/// Runs the half-quadratic sweep (or plain least squares when the prior is
/// disabled) from the current layers and returns the stacked `[L0; L1]`
/// without clamping.
pub fn latent_unconstrained(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let observed = stack_frames(scene, frames)?;
    let grid = Grid::of(scene);
    let op = LayerOperator::all_frames(scene, config.model)?;
    let data_weight = 2.0 * config.lambda1;

    // 2λ1 Kᵀ ∇ᵀ∇ B
    let mut lap_b = vec![0.0; observed.len()];
    grid.laplacian(&observed, &mut lap_b);
    let mut rhs_data = vec![0.0; op.input_len()];
    op.apply_adjoint(&lap_b, &mut rhs_data);
    rhs_data.iter_mut().for_each(|v| *v *= data_weight);

    let mut forward = vec![0.0; op.output_len()];
    let mut lap_fwd = vec![0.0; op.output_len()];
    let mut lap_x = vec![0.0; op.input_len()];
    let mut normal = |x: &[f64], y: &mut [f64], beta: f64| {
        op.apply(x, &mut forward);
        grid.laplacian(&forward, &mut lap_fwd);
        op.apply_adjoint(&lap_fwd, y);
        if beta > 0.0 {
            grid.laplacian(x, &mut lap_x);
            for (yi, li) in y.iter_mut().zip(&lap_x) {
                *yi = data_weight * *yi + beta * li;
            }
        } else {
            y.iter_mut().for_each(|v| *v *= data_weight);
        }
    };

    let mut x = stack_layers(scene);
    if !config.prior_enabled() {
        conjugate_gradient(|v, out| normal(v, out, 0.0), &rhs_data, &mut x, config.cg_max_iter, config.cg_rel_tol)
            .map_err(cg_error)?;
        return Ok(x);
    }

    let len = grid.image_len();
    let (w, h, c) = (grid.width, grid.height, grid.channels);
    let mut gx = vec![0.0; len];
    let mut gy = vec![0.0; len];
    let mut rhs = vec![0.0; x.len()];
    for &beta in &config.beta_schedule {
        let lut = ProxLut::new(beta, config.hyper_exponent);
        // rhs = rhs_data + β ∇ᵀ w with w = prox(∇x), per layer image
        for (img, dst) in x.chunks(len).zip(rhs.chunks_mut(len)) {
            gradient_into(img, w, h, c, &mut gx, &mut gy);
            gx.iter_mut().chain(gy.iter_mut()).for_each(|g| *g = lut.apply(*g));
            gradient_adjoint_into(&gx, &gy, w, h, c, dst);
        }
        for (r, d) in rhs.iter_mut().zip(&rhs_data) {
            *r = beta * *r + d;
        }
        conjugate_gradient(|v, out| normal(v, out, beta), &rhs, &mut x, config.cg_max_iter, config.cg_rel_tol)
            .map_err(cg_error)?;
    }
    Ok(x)
}

/// Data term plus (when enabled) the layer prior for stacked layers.
fn latent_energy(
    grid: &Grid,
    op: &LayerOperator,
    observed: &[f64],
    layers: &[f64],
    config: &SolverConfig,
) -> f64 {
    let mut rendered = vec![0.0; op.output_len()];
    op.apply(layers, &mut rendered);
    let mut e = data_term(grid, observed, &rendered, config.lambda1);
    if config.prior_enabled() {
        e += grid.sparse_prior(layers, config.hyper_exponent);
    }
    e
}

/// Updates `(L0, L1)` for fixed mask and motions. The result is clamped to
/// `[0, 1]` and rejected in favour of the input if it does not lower the
/// latent energy.
pub fn solve_latent(
    scene: &Scene,
    frames: &[ImageBuffer],
    config: &SolverConfig,
) -> Result<(ImageBuffer, ImageBuffer)> {
    let mut x = latent_unconstrained(scene, frames, config)?;
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));

    let grid = Grid::of(scene);
    let observed = stack_frames(scene, frames)?;
    let op = LayerOperator::all_frames(scene, config.model)?;
    let before = latent_energy(&grid, &op, &observed, &stack_layers(scene), config);
    let after = latent_energy(&grid, &op, &observed, &x, config);
    if !after.is_finite() {
        return Err(Error::Numeric("latent energy is not finite".into()));
    }
    if after > before {
        log::debug!("latent step rejected: {after:.6e} > {before:.6e}");
        return Ok((scene.background.clone(), scene.foreground.clone()));
    }
    let len = grid.image_len();
    let bg = ImageBuffer::from_vec(grid.width, grid.height, grid.channels, x[..len].to_vec())?;
    let fg = ImageBuffer::from_vec(grid.width, grid.height, grid.channels, x[len..].to_vec())?;
    Ok((bg, fg))
}
