//! Random scenes for the conditions under which the two blur models agree,
//! plus a control where they must not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::texture::Texture;
use crate::error::Result;
use crate::image::ImageBuffer;
use crate::model::render_all_frames;
use crate::motion::{AffineMotion, CaptureTiming};
use crate::scene::{BlurModelKind, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    StaticBackground,
    StaticForeground,
    HomogeneousBackground,
    /// Both layers moving over a textured background.
    Control,
}

impl SpecialCase {
    pub const EQUIVALENT: [SpecialCase; 3] = [
        SpecialCase::StaticBackground,
        SpecialCase::StaticForeground,
        SpecialCase::HomogeneousBackground,
    ];
}

fn random_motion(rng: &mut ChaCha8Rng, reach: f64) -> AffineMotion {
    AffineMotion::from_params([
        1.0 + rng.random_range(-0.04..0.04),
        rng.random_range(-0.04..0.04),
        rng.random_range(-0.04..0.04),
        1.0 + rng.random_range(-0.04..0.04),
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
    ])
}

fn moving(rng: &mut ChaCha8Rng, frames: usize, size: usize) -> Vec<AffineMotion> {
    let reach = size as f64 / 8.0;
    (0..=frames).map(|_| random_motion(rng, reach)).collect()
}

fn still(rng: &mut ChaCha8Rng, frames: usize, size: usize) -> Vec<AffineMotion> {
    vec![random_motion(rng, size as f64 / 16.0); frames + 1]
}

/// A random scene satisfying `case`: textured layers, a soft blob mask and
/// random affine trajectories over three frames.
pub fn special_case_scene(case: SpecialCase, seed: u64, size: usize) -> Result<Scene> {
    let frames = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texture = |rng: &mut ChaCha8Rng| {
        Texture::Noise {
            seed: rng.random(),
            low: 0.0,
            high: 1.0,
            smooth: 1,
        }
        .render(size, size, 1)
    };
    let fg = texture(&mut rng);
    let bg = match case {
        SpecialCase::HomogeneousBackground => ImageBuffer::filled(size, size, 1, rng.random_range(0.1..0.9)),
        _ => texture(&mut rng),
    };
    let cx = rng.random_range(0.3..0.7) * size as f64;
    let cy = rng.random_range(0.3..0.7) * size as f64;
    let r = rng.random_range(0.15..0.3) * size as f64;
    // A = 1 outside the disk, with a two-pixel soft edge
    let alpha = ImageBuffer::from_fn(size, size, 1, |x, y, _| {
        let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
        ((d - r) / 2.0 + 0.5).clamp(0.0, 1.0)
    });
    let (bg_traj, fg_traj) = match case {
        SpecialCase::StaticBackground => (still(&mut rng, frames, size), moving(&mut rng, frames, size)),
        SpecialCase::StaticForeground => (moving(&mut rng, frames, size), still(&mut rng, frames, size)),
        SpecialCase::HomogeneousBackground | SpecialCase::Control => {
            (moving(&mut rng, frames, size), moving(&mut rng, frames, size))
        }
    };
    let samples = rng.random_range(3..=8);
    Scene::new(
        fg,
        bg,
        alpha,
        bg_traj,
        fg_traj,
        CaptureTiming::new(rng.random_range(0.3..=1.0), samples, frames)?,
    )
}

/// Largest absolute difference between the two models over all frames.
pub fn model_difference(scene: &Scene) -> Result<f64> {
    let prop = render_all_frames(scene, BlurModelKind::Proposed)?;
    let conv = render_all_frames(scene, BlurModelKind::Conventional)?;
    Ok(prop
        .iter()
        .zip(&conv)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialCaseReport {
    pub static_background: f64,
    pub static_foreground: f64,
    pub homogeneous_background: f64,
    pub control: f64,
}

impl SpecialCaseReport {
    /// All three equivalence conditions agree to `tol`.
    pub fn equivalent_within(&self, tol: f64) -> bool {
        self.static_background < tol && self.static_foreground < tol && self.homogeneous_background < tol
    }
}

/// Renders one random scene per condition with both models and reports the
/// maximum absolute differences (64 x 64 scenes).
pub fn check_special_cases(seed: u64) -> Result<SpecialCaseReport> {
    let diff = |case| model_difference(&special_case_scene(case, seed, 64)?);
    Ok(SpecialCaseReport {
        static_background: diff(SpecialCase::StaticBackground)?,
        static_foreground: diff(SpecialCase::StaticForeground)?,
        homogeneous_background: diff(SpecialCase::HomogeneousBackground)?,
        control: diff(SpecialCase::Control)?,
    })
}
