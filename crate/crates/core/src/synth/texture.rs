//! Procedural layer textures and mask shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::ImageBuffer;

/// Grey level or RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Color {
    Gray(f64),
    Rgb([f64; 3]),
}

impl Color {
    pub fn channel(&self, c: usize) -> f64 {
        match self {
            Color::Gray(v) => *v,
            Color::Rgb(rgb) => rgb[c.min(2)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Texture {
    Constant {
        value: Color,
    },
    /// Squares of side `period` pixels alternating between `low` and `high`.
    Checkerboard {
        period: usize,
        #[serde(default = "zero_color")]
        low: Color,
        #[serde(default = "one_color")]
        high: Color,
    },
    /// Seeded i.i.d. uniform noise in `[low, high]`, optionally smoothed by
    /// `smooth` passes of a 3x3 box filter and rescaled to fill the range.
    Noise {
        seed: u64,
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
        #[serde(default)]
        smooth: usize,
    },
}

fn zero_color() -> Color {
    Color::Gray(0.0)
}

fn one_color() -> Color {
    Color::Gray(1.0)
}

fn one() -> f64 {
    1.0
}

impl Texture {
    pub fn render(&self, width: usize, height: usize, channels: usize) -> ImageBuffer {
        match self {
            Texture::Constant { value } => ImageBuffer::from_fn(width, height, channels, |_, _, c| value.channel(c)),
            Texture::Checkerboard { period, low, high } => {
                let p = (*period).max(1);
                ImageBuffer::from_fn(width, height, channels, |x, y, c| {
                    if (x / p + y / p) % 2 == 0 {
                        low.channel(c)
                    } else {
                        high.channel(c)
                    }
                })
            }
            Texture::Noise {
                seed,
                low,
                high,
                smooth,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut img = ImageBuffer::from_fn(width, height, channels, |_, _, _| rng.random::<f64>());
                for _ in 0..*smooth {
                    img = box3(&img);
                }
                if *smooth > 0 {
                    stretch(&mut img);
                }
                img.map(|v| low + (high - low) * v)
            }
        }
    }
}

fn box3(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (img.width() as isize, img.height() as isize);
    ImageBuffer::from_fn(img.width(), img.height(), img.channels(), |x, y, c| {
        let mut acc = 0.0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let xx = (x as isize + dx).clamp(0, w - 1) as usize;
                let yy = (y as isize + dy).clamp(0, h - 1) as usize;
                acc += img.get(xx, yy, c);
            }
        }
        acc / 9.0
    })
}

fn stretch(img: &mut ImageBuffer) {
    let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for v in img.data_mut() {
            *v = (*v - lo) / (hi - lo);
        }
    }
}

/// Foreground region primitives. Pixels covered by any shape get `A = 0`
/// (foreground); the rest are background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disk {
        cx: f64,
        cy: f64,
        radius: f64,
    },
    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
    Bar {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    /// Repeating bars of `bar_width` pixels every `period` pixels.
    Fence {
        period: usize,
        bar_width: usize,
        #[serde(default)]
        offset: usize,
        #[serde(default = "yes")]
        vertical: bool,
    },
}

fn yes() -> bool {
    true
}

impl Shape {
    pub fn covers(&self, x: usize, y: usize) -> bool {
        let (xf, yf) = (x as f64, y as f64);
        match self {
            Shape::Disk { cx, cy, radius } => (xf - cx).powi(2) + (yf - cy).powi(2) <= radius * radius,
            Shape::Bar { x0, y0, x1, y1 } => xf >= *x0 && xf < *x1 && yf >= *y0 && yf < *y1,
            Shape::Fence {
                period,
                bar_width,
                offset,
                vertical,
            } => {
                let coord = if *vertical { x } else { y };
                (coord + period - offset % period) % period < *bar_width
            }
        }
    }
}

pub fn render_mask(shapes: &[Shape], width: usize, height: usize) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, 1, |x, y, _| {
        if shapes.iter().any(|s| s.covers(x, y)) {
            0.0
        } else {
            1.0
        }
    })
}
