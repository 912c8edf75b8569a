use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use crate::error::{Error, Result};
use crate::gradient::{gradient_adjoint_into, gradient_into};
use crate::image::ImageBuffer;
use crate::model::{render_all_linear, stack_layers, LayerOperator, MaskOperator};
use crate::scene::Scene;

/// The terms of the full objective, already weighted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub data_term: f64,
    pub layer_prior: f64,
    pub alpha_tv: f64,
    pub alpha_binary: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(data_term: f64, layer_prior: f64, alpha_tv: f64, alpha_binary: f64) -> Self {
        Self {
            data_term,
            layer_prior,
            alpha_tv,
            alpha_binary,
            total: data_term + layer_prior + alpha_tv + alpha_binary,
        }
    }
}

/// Concatenates frames into one vector after checking they match the scene.
pub fn stack_frames(scene: &Scene, frames: &[ImageBuffer]) -> Result<Vec<f64>> {
    if frames.len() != scene.frame_count() {
        return Err(Error::Shape(format!(
            "{} frames supplied for a {}-frame scene",
            frames.len(),
            scene.frame_count()
        )));
    }
    let mut out = Vec::with_capacity(frames.len() * scene.foreground.data().len());
    for f in frames {
        f.ensure_same_shape(&scene.foreground, "frame vs scene")?;
        out.extend_from_slice(f.data());
    }
    Ok(out)
}

/// Image geometry shared by the stacked vectors of a solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Grid {
    pub fn of(scene: &Scene) -> Self {
        Self {
            width: scene.width(),
            height: scene.height(),
            channels: scene.channels(),
        }
    }

    pub fn with_channels(self, channels: usize) -> Self {
        Self { channels, ..self }
    }

    pub fn image_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    /// `Σ ||∇ v_j||²` over the stacked images in `v`.
    pub fn gradient_energy(&self, v: &[f64]) -> f64 {
        let len = self.image_len();
        let mut gx = vec![0.0; len];
        let mut gy = vec![0.0; len];
        v.chunks(len)
            .map(|img| {
                gradient_into(img, self.width, self.height, self.channels, &mut gx, &mut gy);
                gx.iter().chain(&gy).map(|g| g * g).sum::<f64>()
            })
            .sum()
    }

    /// `∇ᵀ∇` applied to each stacked image.
    pub fn laplacian(&self, v: &[f64], out: &mut [f64]) {
        let len = self.image_len();
        let mut gx = vec![0.0; len];
        let mut gy = vec![0.0; len];
        for (src, dst) in v.chunks(len).zip(out.chunks_mut(len)) {
            gradient_into(src, self.width, self.height, self.channels, &mut gx, &mut gy);
            gradient_adjoint_into(&gx, &gy, self.width, self.height, self.channels, dst);
        }
    }

    pub fn sparse_prior(&self, v: &[f64], exponent: f64) -> f64 {
        let len = self.image_len();
        let mut gx = vec![0.0; len];
        let mut gy = vec![0.0; len];
        v.chunks(len)
            .map(|img| {
                gradient_into(img, self.width, self.height, self.channels, &mut gx, &mut gy);
                gx.iter().chain(&gy).map(|g| g.abs().powf(exponent)).sum::<f64>()
            })
            .sum()
    }

    /// Isotropic total variation of a single-channel image.
    pub fn total_variation(&self, a: &[f64]) -> f64 {
        let mut gx = vec![0.0; a.len()];
        let mut gy = vec![0.0; a.len()];
        gradient_into(a, self.width, self.height, 1, &mut gx, &mut gy);
        gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).sum()
    }
}

pub(crate) fn binary_penalty(alpha: &[f64]) -> f64 {
    alpha.iter().map(|a| a * (1.0 - a)).sum()
}

/// Weighted data term for a rendered stack against the observed stack.
pub(crate) fn data_term(grid: &Grid, observed: &[f64], rendered: &[f64], lambda1: f64) -> f64 {
    let diff: Vec<f64> = observed.iter().zip(rendered).map(|(b, r)| b - r).collect();
    lambda1 * grid.gradient_energy(&diff)
}

/// Evaluates every term of the objective for `scene` against `frames`.
pub fn objective(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<EnergyBreakdown> {
    let observed = stack_frames(scene, frames)?;
    let grid = Grid::of(scene);
    let rendered = render_all_linear(scene, config.model)?;
    let data = data_term(&grid, &observed, &rendered, config.lambda1);
    let prior = grid.sparse_prior(&stack_layers(scene), config.hyper_exponent);
    let alpha = scene.alpha.data();
    let tv = config.lambda2 * grid.with_channels(1).total_variation(alpha);
    let binary = config.lambda3 * binary_penalty(alpha);
    Ok(EnergyBreakdown::new(data, prior, tv, binary))
}

/// Gradient of the data term with respect to `[L0; L1]`.
pub fn data_gradient_layers(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<Vec<f64>> {
    let observed = stack_frames(scene, frames)?;
    let grid = Grid::of(scene);
    let op = LayerOperator::all_frames(scene, config.model)?;
    let mut rendered = vec![0.0; op.output_len()];
    op.apply(&stack_layers(scene), &mut rendered);
    let residual: Vec<f64> = rendered.iter().zip(&observed).map(|(r, b)| r - b).collect();
    let mut lap = vec![0.0; residual.len()];
    grid.laplacian(&residual, &mut lap);
    let mut g = vec![0.0; op.input_len()];
    op.apply_adjoint(&lap, &mut g);
    g.iter_mut().for_each(|v| *v *= 2.0 * config.lambda1);
    Ok(g)
}

/// Gradient of the data term with respect to the mask.
pub fn data_gradient_alpha(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<Vec<f64>> {
    let observed = stack_frames(scene, frames)?;
    let grid = Grid::of(scene);
    let op = MaskOperator::all_frames(scene, config.model)?;
    let mut rendered = vec![0.0; op.output_len()];
    op.apply(scene.alpha.data(), &mut rendered);
    let offset = op.offset();
    let residual: Vec<f64> = rendered
        .iter()
        .zip(&offset)
        .zip(&observed)
        .map(|((r, o), b)| r + o - b)
        .collect();
    let mut lap = vec![0.0; residual.len()];
    grid.laplacian(&residual, &mut lap);
    let mut g = vec![0.0; op.input_len()];
    op.apply_adjoint(&lap, &mut g);
    g.iter_mut().for_each(|v| *v *= 2.0 * config.lambda1);
    Ok(g)
}
