//! Motion refinement: one Nelder-Mead search per (layer, frame opening)
//! block of six affine parameters, scoring only the frames it affects.

use super::config::SolverConfig;
use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::objective::{data_term, Grid};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::model::{stack_layers, LayerOperator};
use crate::motion::AffineMotion;
use crate::scene::{Layer, Scene};

/// Initial simplex offsets: linear part, then translation.
pub const SIMPLEX_STEP: [f64; 6] = [0.01, 0.01, 0.01, 0.01, 0.5, 0.5];

/// Frames whose exposure depends on the motion at opening `j`.
fn affected_frames(j: usize, frames: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2);
    if j > 0 {
        out.push(j - 1);
    }
    if j < frames {
        out.push(j);
    }
    out
}

/// Data term restricted to `frames`.
fn local_data_term(scene: &Scene, observed: &[ImageBuffer], frames: &[usize], config: &SolverConfig) -> Result<f64> {
    let op = LayerOperator::new(scene, frames, config.model)?;
    let mut rendered = vec![0.0; op.output_len()];
    op.apply(&stack_layers(scene), &mut rendered);
    let target: Vec<f64> = frames
        .iter()
        .flat_map(|&f| observed[f].data().iter().copied())
        .collect();
    Ok(data_term(&Grid::of(scene), &target, &rendered, config.lambda1))
}

/// Refines every motion of both layers, background first, then in ascending
/// opening order. A block is only replaced when its local data term drops.
pub fn solve_motion(scene: &Scene, frames: &[ImageBuffer], config: &SolverConfig) -> Result<[Vec<AffineMotion>; 2]> {
    config.validate()?;
    super::objective::stack_frames(scene, frames)?;
    let mut work = scene.clone();
    let n = scene.frame_count();
    let opts = NelderMeadOptions {
        initial_step: SIMPLEX_STEP.to_vec(),
        max_evals: config.nm_max_evals,
        f_tol: 0.0,
        x_tol: 1e-4,
    };
    for layer in Layer::ALL {
        for j in 0..=n {
            let affected = affected_frames(j, n);
            let current = *work.motion(layer, j);
            let before = local_data_term(&work, frames, &affected, config)?;
            if !before.is_finite() {
                return Err(Error::Numeric(format!("data term is {before} before motion search")));
            }
            let mut probe = work.clone();
            let result = nelder_mead(
                |p: &[f64]| -> Result<f64> {
                    let m = AffineMotion::from_params(p.try_into().expect("six parameters"));
                    if !m.is_valid() {
                        return Ok(f64::MAX);
                    }
                    probe.motions[layer.index()][j] = m;
                    let e = local_data_term(&probe, frames, &affected, config)?;
                    if e.is_nan() {
                        return Err(Error::Numeric("motion objective evaluated to NaN".into()));
                    }
                    Ok(e)
                },
                &current.params(),
                &opts,
            )?;
            if result.f < before {
                let candidate = AffineMotion::from_params(result.x.as_slice().try_into().expect("six parameters"));
                work.motions[layer.index()][j] = candidate;
                log::trace!("{layer:?} motion {j}: {before:.6e} -> {:.6e}", result.f);
            }
        }
    }
    Ok(work.motions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affected_frames_cover_both_neighbours() {
        assert_eq!(affected_frames(0, 3), vec![0]);
        assert_eq!(affected_frames(2, 3), vec![1, 2]);
        assert_eq!(affected_frames(3, 3), vec![2]);
    }
}
