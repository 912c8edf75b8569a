//! The unknowns of a two-layer scene and the static compositing rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::motion::{AffineMotion, CaptureTiming};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Background = 0,
    Foreground = 1,
}

impl Layer {
    pub const ALL: [Layer; 2] = [Layer::Background, Layer::Foreground];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Which generative blur model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurModelKind {
    /// Composite each instantaneous image, then integrate over the exposure.
    #[default]
    Proposed,
    /// Blur each layer and the mask separately, then composite.
    Conventional,
}

impl std::str::FromStr for BlurModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "conventional" => Ok(Self::Conventional),
            other => Err(format!("unknown blur model '{other}'")),
        }
    }
}

/// Foreground, background, alpha mask (1 = background) and per-frame layer
/// motions. `motions[layer][i]` is the motion at the shutter opening of frame
/// `i`; each layer carries `N + 1` entries so the last exposure can be
/// interpolated.
///
/// The foreground is stored without the `(1 − A)` premultiplication; the
/// blur operators apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub foreground: ImageBuffer,
    pub background: ImageBuffer,
    pub alpha: ImageBuffer,
    pub motions: [Vec<AffineMotion>; 2],
    pub timing: CaptureTiming,
}

impl Scene {
    pub fn new(
        foreground: ImageBuffer,
        background: ImageBuffer,
        alpha: ImageBuffer,
        background_motions: Vec<AffineMotion>,
        foreground_motions: Vec<AffineMotion>,
        timing: CaptureTiming,
    ) -> Result<Self> {
        let scene = Self {
            foreground,
            background,
            alpha,
            motions: [background_motions, foreground_motions],
            timing,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        self.foreground
            .ensure_same_shape(&self.background, "foreground vs background")?;
        if !self.alpha.same_dims(&self.foreground) || self.alpha.channels() != 1 {
            return Err(Error::Shape(format!(
                "alpha must be single-channel {}x{}",
                self.width(),
                self.height()
            )));
        }
        if self.alpha.data().iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Shape("alpha outside [0, 1]".into()));
        }
        for layer in Layer::ALL {
            let m = &self.motions[layer.index()];
            if m.len() != self.timing.frames + 1 {
                return Err(Error::Shape(format!(
                    "{layer:?} trajectory has {} motions, expected {}",
                    m.len(),
                    self.timing.frames + 1
                )));
            }
            for motion in m {
                motion.validate()?;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.foreground.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.foreground.height()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.foreground.channels()
    }

    #[inline]
    pub fn frame_count(&self) -> usize {
        self.timing.frames
    }

    pub fn layer(&self, layer: Layer) -> &ImageBuffer {
        match layer {
            Layer::Background => &self.background,
            Layer::Foreground => &self.foreground,
        }
    }

    pub fn layer_mut(&mut self, layer: Layer) -> &mut ImageBuffer {
        match layer {
            Layer::Background => &mut self.background,
            Layer::Foreground => &mut self.foreground,
        }
    }

    pub fn motion(&self, layer: Layer, frame: usize) -> &AffineMotion {
        &self.motions[layer.index()][frame]
    }

    pub(crate) fn check_frame(&self, frame: usize) -> Result<()> {
        if frame < self.timing.frames {
            Ok(())
        } else {
            Err(Error::Index(format!(
                "frame {frame} out of range for {} frames",
                self.timing.frames
            )))
        }
    }
}

/// `(1 − A) ⊙ L1 + A ⊙ L0`, per channel.
pub fn composite(fg: &ImageBuffer, bg: &ImageBuffer, alpha: &ImageBuffer) -> Result<ImageBuffer> {
    fg.ensure_same_shape(bg, "composite layers")?;
    if !alpha.same_dims(fg) || alpha.channels() != 1 {
        return Err(Error::Shape("composite mask must be single-channel with layer dims".into()));
    }
    let c = fg.channels();
    let mut out = ImageBuffer::new(fg.width(), fg.height(), c);
    for (p, &a) in alpha.data().iter().enumerate() {
        for k in 0..c {
            let i = p * c + k;
            out.data_mut()[i] = (1.0 - a) * fg.data()[i] + a * bg.data()[i];
        }
    }
    Ok(out)
}
