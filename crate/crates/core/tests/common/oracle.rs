//! Straight-line re-implementations used as independent test oracles.

use layerblur::{AffineMotion, ImageBuffer};
use nalgebra::DMatrix;

pub fn sample(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let at = |xi: i64, yi: i64| img.get(xi.clamp(0, w - 1) as usize, yi.clamp(0, h - 1) as usize, c);
    let (xi, yi) = (x0 as i64, y0 as i64);
    (1.0 - fx) * (1.0 - fy) * at(xi, yi)
        + fx * (1.0 - fy) * at(xi + 1, yi)
        + (1.0 - fx) * fy * at(xi, yi + 1)
        + fx * fy * at(xi + 1, yi + 1)
}

pub fn lerp_motion(a: &AffineMotion, b: &AffineMotion, s: f64) -> AffineMotion {
    let (pa, pb) = (a.params(), b.params());
    let mut p = [0.0; 6];
    for k in 0..6 {
        p[k] = pa[k] + s * (pb[k] - pa[k]);
    }
    AffineMotion::from_params(p)
}

pub fn diffs(img: &ImageBuffer, x: usize, y: usize, c: usize) -> (f64, f64) {
    let v = img.get(x, y, c);
    let dx = if x + 1 < img.width() { img.get(x + 1, y, c) - v } else { 0.0 };
    let dy = if y + 1 < img.height() { img.get(x, y + 1, c) - v } else { 0.0 };
    (dx, dy)
}

pub fn fd_check(analytic: &[f64], mut f: impl FnMut(usize, f64) -> f64) {
    let h = 1e-4;
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    assert!(scale > 0.0);
    for (i, g) in analytic.iter().enumerate() {
        let fd = (f(i, h) - f(i, -h)) / (2.0 * h);
        assert!((fd - g).abs() <= 1e-5 * scale, "entry {i}: fd {fd} vs {g}");
    }
}

pub fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Grid scan to bracket, golden section to refine, then compare with x = 0.
pub fn brute_prox(v: f64, beta: f64, p: f64) -> f64 {
    let f = |x: f64| 0.5 * beta * (x - v).powi(2) + x.abs().powf(p);
    let a = v.abs();
    if a == 0.0 {
        return 0.0;
    }
    let steps = 400;
    let g = |x: f64| f(v.signum() * x);
    let mut best = (0, g(0.0));
    for k in 1..=steps {
        let e = g(a * k as f64 / steps as f64);
        if e < best.1 {
            best = (k, e);
        }
    }
    if best.0 == 0 {
        return 0.0;
    }
    let lo = a * (best.0 as f64 - 1.0) / steps as f64;
    let hi = a * ((best.0 + 1).min(steps) as f64) / steps as f64;
    let x = golden(g, lo, hi);
    if g(x) < g(0.0) { v.signum() * x } else { 0.0 }
}

pub fn dense_gradient(w: usize, h: usize) -> DMatrix<f64> {
    let n = w * h;
    let mut g = DMatrix::zeros(2 * n, n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                g[(i, i + 1)] = 1.0;
                g[(i, i)] = -1.0;
            }
            if y + 1 < h {
                g[(n + i, i + w)] = 1.0;
                g[(n + i, i)] = -1.0;
            }
        }
    }
    g
}

/// Bilinear taps `(row-major index, weight)` at `(x, y)` with indices clamped
/// to the grid; zero-weight taps are dropped.
pub fn bilinear_taps(x: f64, y: f64, w: usize, h: usize) -> Vec<(usize, f64)> {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as i64, y0 as i64);
    let idx = |a: i64, b: i64| (b.clamp(0, h as i64 - 1) as usize) * w + a.clamp(0, w as i64 - 1) as usize;
    [
        (idx(xi, yi), (1.0 - fx) * (1.0 - fy)),
        (idx(xi + 1, yi), fx * (1.0 - fy)),
        (idx(xi, yi + 1), (1.0 - fx) * fy),
        (idx(xi + 1, yi + 1), fx * fy),
    ]
    .into_iter()
    .filter(|&(_, wt)| wt != 0.0)
    .collect()
}

/// Motion of one exposure sample: `θ_i + (k/M)·duty·(θ_{i+1} − θ_i)`.
pub fn sample_motion(open: &AffineMotion, next: &AffineMotion, k: usize, samples: usize, duty: f64) -> AffineMotion {
    lerp_motion(open, next, k as f64 / samples as f64 * duty)
}
