//! Dense pyramidal Lucas-Kanade optical flow and the raw flow file format.
//!
//! File layout: `u32` width, `u32` height (little endian), then the `u` and
//! `v` planes as row-major little-endian `f32`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const FLOW_WINDOW: usize = 7;
pub const FLOW_ITERATIONS: usize = 3;
pub const FLOW_PYRAMID_SCALE: f64 = 0.8;
/// Coarsest flow level keeps its smaller side at or above this.
pub const FLOW_MIN_LEVEL: usize = 16;
/// Largest update per Lucas-Kanade iteration, pixels of the current level.
const MAX_STEP: f64 = 1.0;

/// Per-pixel displacement from the first image into the second:
/// `a(x, y) ≈ b(x + u, y + v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: ImageBuffer,
    pub v: ImageBuffer,
    /// Set when the inputs carry no usable texture; the flow is then zero.
    pub degenerate: bool,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: ImageBuffer::new(width, height, 1),
            v: ImageBuffer::new(width, height, 1),
            degenerate: false,
        }
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        (self.u.get(x, y, 0), self.v.get(x, y, 0))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Shape(msg) => Error::Shape(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Shape("flow file shorter than its header".into()));
        }
        let w = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
        let h = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let n = w * h;
        if w == 0 || h == 0 || bytes.len() != 8 + 8 * n {
            return Err(Error::Shape(format!(
                "flow payload of {} bytes does not match {w}x{h}",
                bytes.len() - 8
            )));
        }
        let plane = |k: usize| -> Vec<f64> {
            bytes[8 + 4 * n * k..8 + 4 * n * (k + 1)]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect()
        };
        Ok(Self {
            u: ImageBuffer::from_vec(w, h, 1, plane(0))?,
            v: ImageBuffer::from_vec(w, h, 1, plane(1))?,
            degenerate: false,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.u.pixel_count());
        out.extend_from_slice(&(self.width() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height() as u32).to_le_bytes());
        for plane in [&self.u, &self.v] {
            for &x in plane.data() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Central-difference gradients with one-sided differences at the border.
fn central_gradient(img: &ImageBuffer) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (t, b) = (y.saturating_sub(1), (y + 1).min(h - 1));
            if r > l {
                gx[y * w + x] = (d[y * w + r] - d[y * w + l]) / (r - l) as f64;
            }
            if b > t {
                gy[y * w + x] = (d[b * w + x] - d[t * w + x]) / (b - t) as f64;
            }
        }
    }
    (gx, gy)
}

/// Sum over a `(2r+1)²` window, clipped at the border, via a summed-area table.
fn box_sum(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += src[y * w + x];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            out[y * w + x] = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
                + sat[y0 * (w + 1) + x0];
        }
    }
    out
}

fn refine_level(a: &ImageBuffer, b: &ImageBuffer, u: &mut [f64], v: &mut [f64]) {
    let (w, h) = (a.width(), a.height());
    let r = FLOW_WINDOW / 2;
    let (gx, gy) = central_gradient(a);
    let sxx = box_sum(&gx.iter().map(|g| g * g).collect::<Vec<_>>(), w, h, r);
    let sxy = box_sum(&gx.iter().zip(&gy).map(|(p, q)| p * q).collect::<Vec<_>>(), w, h, r);
    let syy = box_sum(&gy.iter().map(|g| g * g).collect::<Vec<_>>(), w, h, r);
    // windows whose smaller eigenvalue is weak relative to the image's
    // typical texture cannot be tracked; leave their flow untouched
    let mean_trace = sxx.iter().zip(&syy).map(|(a, b)| a + b).sum::<f64>() / (w * h) as f64;
    let min_eig = 1e-2 * mean_trace;
    for _ in 0..FLOW_ITERATIONS {
        let err: Vec<f64> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                b.sample_bilinear(x + u[i], y + v[i], 0) - a.data()[i]
            })
            .collect();
        let bx = box_sum(&gx.iter().zip(&err).map(|(g, e)| g * e).collect::<Vec<_>>(), w, h, r);
        let by = box_sum(&gy.iter().zip(&err).map(|(g, e)| g * e).collect::<Vec<_>>(), w, h, r);
        for i in 0..w * h {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let half_trace = 0.5 * (sxx[i] + syy[i]);
            let lambda_min = half_trace - (half_trace * half_trace - det).max(0.0).sqrt();
            if !(lambda_min > min_eig) {
                continue;
            }
            let du = (syy[i] * bx[i] - sxy[i] * by[i]) / det;
            let dv = (sxx[i] * by[i] - sxy[i] * bx[i]) / det;
            let norm = (du * du + dv * dv).sqrt();
            let s = if norm > MAX_STEP { MAX_STEP / norm } else { 1.0 };
            u[i] -= s * du;
            v[i] -= s * dv;
        }
    }
}

/// 3x3 median filter, window clipped at the border.
fn median3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    let mut buf = Vec::with_capacity(9);
    for y in 0..h {
        for x in 0..w {
            buf.clear();
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    buf.push(src[yy * w + xx]);
                }
            }
            buf.sort_by(f64::total_cmp);
            out[y * w + x] = buf[buf.len() / 2];
        }
    }
    out
}

fn pyramid_sizes(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![(width, height)];
    loop {
        let (w, h) = *sizes.last().expect("non-empty");
        let next = (
            (w as f64 * FLOW_PYRAMID_SCALE).ceil() as usize,
            (h as f64 * FLOW_PYRAMID_SCALE).ceil() as usize,
        );
        if next.0.min(next.1) < FLOW_MIN_LEVEL || next == (w, h) {
            break;
        }
        sizes.push(next);
    }
    sizes
}

/// Dense flow from `a` to `b` by coarse-to-fine Lucas-Kanade.
pub fn compute_flow(a: &ImageBuffer, b: &ImageBuffer) -> Result<FlowField> {
    if !a.same_dims(b) {
        return Err(Error::Shape(format!(
            "flow inputs {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (ga, gb) = (a.to_gray(), b.to_gray());
    let (w, h) = (a.width(), a.height());
    let texture = |img: &ImageBuffer| {
        let (gx, gy) = central_gradient(img);
        gx.iter().chain(&gy).fold(0.0f64, |m, g| m.max(g.abs()))
    };
    if texture(&ga) < 1e-9 || texture(&gb) < 1e-9 {
        log::warn!("flow inputs are constant; returning zero flow");
        let mut f = FlowField::zeros(w, h);
        f.degenerate = true;
        return Ok(f);
    }

    let sizes = pyramid_sizes(w, h);
    let mut u: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    let mut prev = (0, 0);
    for &(lw, lh) in sizes.iter().rev() {
        let la = ga.resize(lw, lh);
        let lb = gb.resize(lw, lh);
        if u.is_empty() {
            u = vec![0.0; lw * lh];
            v = vec![0.0; lw * lh];
        } else {
            let (sx, sy) = (lw as f64 / prev.0 as f64, lh as f64 / prev.1 as f64);
            let up = |f: &[f64], s: f64| -> Vec<f64> {
                let img = ImageBuffer::from_vec(prev.0, prev.1, 1, f.to_vec()).expect("level size");
                img.resize(lw, lh).data().iter().map(|d| d * s).collect()
            };
            u = up(&u, sx);
            v = up(&v, sy);
        }
        refine_level(&la, &lb, &mut u, &mut v);
        u = median3(&u, lw, lh);
        v = median3(&v, lw, lh);
        prev = (lw, lh);
    }
    Ok(FlowField {
        u: ImageBuffer::from_vec(w, h, 1, u)?,
        v: ImageBuffer::from_vec(w, h, 1, v)?,
        degenerate: false,
    })
}
