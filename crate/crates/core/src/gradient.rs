//! Forward-difference image gradient with a replicate (Neumann) boundary.
//!
//! `gx(x) = u(x+1) − u(x)` with zero in the last column, likewise for `gy`
//! in the last row. The adjoint is the matching negative divergence.

use crate::image::ImageBuffer;

pub fn gradient_into(u: &[f64], width: usize, height: usize, channels: usize, gx: &mut [f64], gy: &mut [f64]) {
    let stride = width * channels;
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let i = y * stride + x * channels + c;
                gx[i] = if x + 1 < width { u[i + channels] - u[i] } else { 0.0 };
                gy[i] = if y + 1 < height { u[i + stride] - u[i] } else { 0.0 };
            }
        }
    }
}

/// `out = ∇ᵀ (px, py)`.
pub fn gradient_adjoint_into(
    px: &[f64],
    py: &[f64],
    width: usize,
    height: usize,
    channels: usize,
    out: &mut [f64],
) {
    let stride = width * channels;
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let i = y * stride + x * channels + c;
                let mut v = 0.0;
                if x + 1 < width {
                    v -= px[i];
                }
                if x > 0 {
                    v += px[i - channels];
                }
                if y + 1 < height {
                    v -= py[i];
                }
                if y > 0 {
                    v += py[i - stride];
                }
                out[i] = v;
            }
        }
    }
}

pub fn image_gradient(src: &ImageBuffer) -> (ImageBuffer, ImageBuffer) {
    let (w, h, c) = (src.width(), src.height(), src.channels());
    let mut gx = ImageBuffer::new(w, h, c);
    let mut gy = ImageBuffer::new(w, h, c);
    gradient_into(src.data(), w, h, c, gx.data_mut(), gy.data_mut());
    (gx, gy)
}

pub fn image_gradient_adjoint(gx: &ImageBuffer, gy: &ImageBuffer) -> ImageBuffer {
    let (w, h, c) = (gx.width(), gx.height(), gx.channels());
    let mut out = ImageBuffer::new(w, h, c);
    gradient_adjoint_into(gx.data(), gy.data(), w, h, c, out.data_mut());
    out
}

/// `∇ᵀ∇ u`, the (positive semi-definite) discrete Laplacian.
pub fn gradient_normal(u: &[f64], width: usize, height: usize, channels: usize, out: &mut [f64]) {
    let mut gx = vec![0.0; u.len()];
    let mut gy = vec![0.0; u.len()];
    gradient_into(u, width, height, channels, &mut gx, &mut gy);
    gradient_adjoint_into(&gx, &gy, width, height, channels, out);
}
