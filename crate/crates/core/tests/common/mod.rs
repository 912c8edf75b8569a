#![allow(dead_code)]

pub mod oracle;

use layerblur::synth::Texture;
use layerblur::{AffineMotion, CaptureTiming, ImageBuffer, Scene};

pub fn noise(seed: u64, size: (usize, usize), channels: usize, low: f64, high: f64, smooth: usize) -> ImageBuffer {
    Texture::Noise {
        seed,
        low,
        high,
        smooth,
    }
    .render(size.0, size.1, channels)
}

/// Disk of radius `r` centred at `(cx, cy)` with A = 0 inside and a linear
/// ramp of width `soft` at the rim.
pub fn soft_disk(width: usize, height: usize, cx: f64, cy: f64, r: f64, soft: f64) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, 1, |x, y, _| {
        let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
        if soft <= 0.0 {
            if d <= r { 0.0 } else { 1.0 }
        } else {
            ((d - r) / soft + 0.5).clamp(0.0, 1.0)
        }
    })
}

/// Trajectories of pure translations `step * (i - reference)`.
pub fn translations(frames: usize, reference: usize, step: (f64, f64)) -> Vec<AffineMotion> {
    (0..=frames)
        .map(|i| {
            let k = i as f64 - reference as f64;
            AffineMotion::translation(step.0 * k, step.1 * k)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SceneParams {
    pub size: (usize, usize),
    pub channels: usize,
    pub frames: usize,
    pub samples: usize,
    pub duty: f64,
    pub fg_step: (f64, f64),
    pub bg_step: (f64, f64),
    pub seed: u64,
    pub smooth: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            size: (32, 32),
            channels: 1,
            frames: 3,
            samples: 4,
            duty: 0.5,
            fg_step: (2.0, 1.0),
            bg_step: (-1.5, 0.5),
            seed: 1,
            smooth: 2,
        }
    }
}

/// Textured layers in `[0.1, 0.9]`, a soft disk in the middle.
pub fn textured_scene(params: &SceneParams) -> Scene {
    let (w, h) = params.size;
    let fg = noise(params.seed, params.size, params.channels, 0.1, 0.9, params.smooth);
    let bg = noise(params.seed + 1000, params.size, params.channels, 0.1, 0.9, params.smooth);
    let r = w.min(h) as f64 / 4.0;
    let alpha = soft_disk(w, h, w as f64 / 2.0 - 0.5, h as f64 / 2.0 - 0.5, r, 2.0);
    let reference = params.frames / 2;
    Scene::new(
        fg,
        bg,
        alpha,
        translations(params.frames, reference, params.bg_step),
        translations(params.frames, reference, params.fg_step),
        CaptureTiming::new(params.duty, params.samples, params.frames).unwrap(),
    )
    .unwrap()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
