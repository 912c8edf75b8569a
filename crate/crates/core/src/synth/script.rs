//! JSON scene scripts describing synthetic blurred sequences.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::texture::{render_mask, Shape, Texture};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::model::render_all_frames;
use crate::motion::{auto_sample_count, AffineMotion, CaptureTiming};
use crate::scene::{BlurModelKind, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerSource {
    File { file: PathBuf },
    Procedural(Texture),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    /// Grey PNG read as `A = value / 255` (white is background).
    File { file: PathBuf },
    Shapes { shapes: Vec<Shape> },
}

/// A synthetic two-layer sequence. Each trajectory holds `N + 1` motions
/// (frame-to-reference maps at each shutter opening).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneScript {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub foreground: LayerSource,
    pub background: LayerSource,
    pub mask: MaskSource,
    pub foreground_motion: Vec<AffineMotion>,
    pub background_motion: Vec<AffineMotion>,
    #[serde(default = "default_duty")]
    pub duty_cycle: f64,
    /// Exposure samples `M`; derived from the fastest motion when absent.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Standard deviation of additive Gaussian noise, intensity units.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_channels() -> usize {
    1
}

fn default_duty() -> f64 {
    0.5
}

impl SceneScript {
    /// Reads a script; relative file sources resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut script: SceneScript =
            serde_json::from_str(&text).map_err(|e| Error::Script(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            script.resolve_paths(dir);
        }
        script.validate()?;
        Ok(script)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let LayerSource::File { file } = &mut self.foreground {
            fix(file);
        }
        if let LayerSource::File { file } = &mut self.background {
            fix(file);
        }
        if let MaskSource::File { file } = &mut self.mask {
            fix(file);
        }
    }

    pub fn frame_count(&self) -> usize {
        self.foreground_motion.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Script("empty image size".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Script(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        if self.foreground_motion.len() < 2 {
            return Err(Error::Script("trajectories need at least two motions (one frame)".into()));
        }
        if self.foreground_motion.len() != self.background_motion.len() {
            return Err(Error::Script(format!(
                "trajectory lengths differ: foreground {} vs background {}",
                self.foreground_motion.len(),
                self.background_motion.len()
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Script("noise_sigma must be non-negative".into()));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::Script("duty_cycle must lie in (0, 1]".into()));
        }
        if self.samples == Some(0) {
            return Err(Error::Script("samples must be positive".into()));
        }
        for m in self.foreground_motion.iter().chain(&self.background_motion) {
            if !m.is_valid() {
                return Err(Error::Script(format!("non-invertible motion {m:?}")));
            }
        }
        Ok(())
    }

    pub fn timing(&self) -> CaptureTiming {
        let samples = self.samples.unwrap_or_else(|| {
            auto_sample_count(
                &[self.foreground_motion.clone(), self.background_motion.clone()],
                self.duty_cycle,
                self.width,
                self.height,
            )
        });
        CaptureTiming {
            duty_cycle: self.duty_cycle,
            samples,
            frames: self.frame_count(),
        }
    }

    fn layer(&self, src: &LayerSource) -> Result<ImageBuffer> {
        match src {
            LayerSource::Procedural(t) => Ok(t.render(self.width, self.height, self.channels)),
            LayerSource::File { file } => {
                let img = ImageBuffer::load_png(file)?;
                self.check_dims(&img, file)?;
                Ok(if img.channels() == self.channels {
                    img
                } else if self.channels == 1 {
                    img.to_gray()
                } else {
                    img.broadcast(3)
                })
            }
        }
    }

    fn check_dims(&self, img: &ImageBuffer, file: &Path) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::Script(format!(
                "{} is {}x{}, script expects {}x{}",
                file.display(),
                img.width(),
                img.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    /// Ground-truth scene described by the script.
    pub fn build_scene(&self) -> Result<Scene> {
        self.validate()?;
        let fg = self.layer(&self.foreground)?;
        let bg = self.layer(&self.background)?;
        let alpha = match &self.mask {
            MaskSource::Shapes { shapes } => render_mask(shapes, self.width, self.height),
            MaskSource::File { file } => {
                let m = ImageBuffer::load_png(file)?;
                self.check_dims(&m, file)?;
                m.to_gray()
            }
        };
        Scene::new(
            fg,
            bg,
            alpha,
            self.background_motion.clone(),
            self.foreground_motion.clone(),
            self.timing(),
        )
    }
}

/// Renders every frame of the script under `kind`, adds noise, and returns
/// the frames with the exact ground-truth scene.
pub fn render_sequence(script: &SceneScript, kind: BlurModelKind) -> Result<(Vec<ImageBuffer>, Scene)> {
    let scene = script.build_scene()?;
    let mut frames = render_all_frames(&scene, kind)?;
    if script.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
        let normal = Normal::new(0.0, script.noise_sigma).map_err(|e| Error::Script(e.to_string()))?;
        for f in &mut frames {
            for v in f.data_mut() {
                *v += normal.sample(&mut rng);
            }
            f.clamp_unit();
        }
    }
    Ok((frames, scene))
}

/// A fence drifting left over a textured background drifting right at the
/// same speed: wide bars hide parts of the background for whole exposures.
///
/// One frame is enough; translations are whole pixels per exposure sample
/// so occlusion is exact.
pub fn fence_script(size: usize, frames: usize) -> SceneScript {
    let speed = 8.0;
    let fg: Vec<AffineMotion> = (0..=frames)
        .map(|i| AffineMotion::translation(speed * i as f64, 0.0))
        .collect();
    let bg: Vec<AffineMotion> = (0..=frames)
        .map(|i| AffineMotion::translation(-speed * i as f64, 0.0))
        .collect();
    SceneScript {
        width: size,
        height: size,
        channels: 1,
        foreground: LayerSource::Procedural(Texture::Constant {
            value: super::texture::Color::Gray(0.15),
        }),
        background: LayerSource::Procedural(Texture::Noise {
            seed: 5,
            low: 0.0,
            high: 1.0,
            smooth: 1,
        }),
        mask: MaskSource::Shapes {
            shapes: vec![Shape::Fence {
                period: 16,
                bar_width: 12,
                offset: 2,
                vertical: true,
            }],
        },
        foreground_motion: fg,
        background_motion: bg,
        duty_cycle: 0.5,
        samples: Some(4),
        noise_sigma: 0.0,
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::composite;

    fn still_script() -> SceneScript {
        let mut s = fence_script(16, 3);
        s.foreground_motion = vec![AffineMotion::IDENTITY; 4];
        s.background_motion = vec![AffineMotion::IDENTITY; 4];
        s
    }

    #[test]
    fn still_script_frames_equal_composite() {
        let (frames, scene) = render_sequence(&still_script(), BlurModelKind::Proposed).unwrap();
        assert_eq!(frames.len(), 3);
        let comp = composite(&scene.foreground, &scene.background, &scene.alpha).unwrap();
        for f in &frames {
            assert!(f.max_abs_diff(&comp) < 1e-12);
        }
    }

    #[test]
    fn fence_models_differ() {
        let s = fence_script(32, 1);
        let (prop, _) = render_sequence(&s, BlurModelKind::Proposed).unwrap();
        let (conv, _) = render_sequence(&s, BlurModelKind::Conventional).unwrap();
        assert!(prop[0].max_abs_diff(&conv[0]) > 0.05);
    }

    #[test]
    fn noise_is_deterministic() {
        let mut s = fence_script(16, 2);
        s.noise_sigma = 0.05;
        s.seed = 42;
        let (a, _) = render_sequence(&s, BlurModelKind::Proposed).unwrap();
        let (b, _) = render_sequence(&s, BlurModelKind::Proposed).unwrap();
        assert_eq!(a, b);
        s.seed = 43;
        let (c, _) = render_sequence(&s, BlurModelKind::Proposed).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_scripts() {
        let mut s = still_script();
        s.background_motion.pop();
        assert!(matches!(s.validate(), Err(Error::Script(_))));
        let mut s = still_script();
        s.noise_sigma = -1.0;
        assert!(s.validate().is_err());
        assert!(serde_json::from_str::<SceneScript>(r#"{"width": 4}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = fence_script(24, 2);
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: SceneScript = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
