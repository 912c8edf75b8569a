//! Bilinear gather warps and their exact transposes.
//!
//! Output pixel `x` samples the source at `motion(x)`; samples that fall
//! outside the grid are clamped to the nearest edge pixel, so every row of
//! the warp matrix sums to one.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::motion::AffineMotion;

/// Precomputed sparse rows of a warp matrix: four taps per output pixel.
#[derive(Debug, Clone)]
pub struct WarpStencil {
    width: usize,
    height: usize,
    taps: Vec<[(u32, f64); 4]>,
}

impl WarpStencil {
    pub fn new(width: usize, height: usize, motion: &AffineMotion) -> Result<Self> {
        motion.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::Shape("empty warp grid".into()));
        }
        let (w, h) = (width as isize, height as isize);
        let mut taps = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = motion.apply(x as f64, y as f64);
                let x0 = sx.floor();
                let y0 = sy.floor();
                let fx = sx - x0;
                let fy = sy - y0;
                let (xi, yi) = (x0 as isize, y0 as isize);
                let idx = |xx: isize, yy: isize| {
                    (yy.clamp(0, h - 1) * w + xx.clamp(0, w - 1)) as u32
                };
                taps.push([
                    (idx(xi, yi), (1.0 - fx) * (1.0 - fy)),
                    (idx(xi + 1, yi), fx * (1.0 - fy)),
                    (idx(xi, yi + 1), (1.0 - fx) * fy),
                    (idx(xi + 1, yi + 1), fx * fy),
                ]);
            }
        }
        Ok(Self {
            width,
            height,
            taps,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Taps of output pixel `p` (row-major index).
    #[inline]
    pub fn taps(&self, p: usize) -> &[(u32, f64); 4] {
        &self.taps[p]
    }

    /// `dst = W src` for interleaved data with `channels` channels.
    pub fn gather(&self, src: &[f64], channels: usize, dst: &mut [f64]) {
        debug_assert_eq!(src.len(), self.taps.len() * channels);
        debug_assert_eq!(dst.len(), src.len());
        if channels == 1 {
            for (out, taps) in dst.iter_mut().zip(&self.taps) {
                let mut acc = 0.0;
                for &(i, wt) in taps {
                    acc += wt * src[i as usize];
                }
                *out = acc;
            }
        } else {
            for (out, taps) in dst.chunks_exact_mut(channels).zip(&self.taps) {
                for (c, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &(i, wt) in taps {
                        acc += wt * src[i as usize * channels + c];
                    }
                    *o = acc;
                }
            }
        }
    }

    /// `dst += Wᵀ src`.
    pub fn scatter_add(&self, src: &[f64], channels: usize, dst: &mut [f64]) {
        debug_assert_eq!(src.len(), self.taps.len() * channels);
        debug_assert_eq!(dst.len(), src.len());
        for (p, taps) in self.taps.iter().enumerate() {
            for c in 0..channels {
                let v = src[p * channels + c];
                if v == 0.0 {
                    continue;
                }
                for &(i, wt) in taps {
                    dst[i as usize * channels + c] += wt * v;
                }
            }
        }
    }

    pub fn apply(&self, src: &ImageBuffer) -> ImageBuffer {
        let mut out = ImageBuffer::new(src.width(), src.height(), src.channels());
        self.gather(src.data(), src.channels(), out.data_mut());
        out
    }

    pub fn apply_adjoint(&self, src: &ImageBuffer) -> ImageBuffer {
        let mut out = ImageBuffer::new(src.width(), src.height(), src.channels());
        self.scatter_add(src.data(), src.channels(), out.data_mut());
        out
    }
}

/// Resamples `src` at `motion(x)` for every output pixel `x`.
pub fn warp_affine(src: &ImageBuffer, motion: &AffineMotion) -> Result<ImageBuffer> {
    let stencil = WarpStencil::new(src.width(), src.height(), motion)?;
    Ok(stencil.apply(src))
}

/// Exact transpose of [`warp_affine`] for the same motion.
pub fn warp_adjoint(src: &ImageBuffer, motion: &AffineMotion) -> Result<ImageBuffer> {
    let stencil = WarpStencil::new(src.width(), src.height(), motion)?;
    Ok(stencil.apply_adjoint(src))
}
