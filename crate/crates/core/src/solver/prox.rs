//! Proximal map of `|x|^p` (0 < p ≤ 1) for the half-quadratic latent step:
//!
//! `prox(v) = argmin_x (β/2)(x − v)² + |x|^p`.
//!
//! The map is odd, monotone, and for `p < 1` jumps from 0 to a positive
//! branch at a threshold `v_t`. A table over `|v| ∈ [0, 1]` is interpolated
//! linearly; the cell holding the jump and anything beyond the table are
//! solved directly.

pub const LUT_ENTRIES: usize = 1024;

fn energy(x: f64, v: f64, beta: f64, p: f64) -> f64 {
    0.5 * beta * (x - v).powi(2) + x.abs().powf(p)
}

/// Exact scalar solve, used to fill the table.
pub fn prox_exact(v: f64, beta: f64, p: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let s = v.signum();
    let a = v.abs();
    // f'(x) = β(x − a) + p x^{p−1} on x > 0; f'' vanishes at x_c
    let deriv = |x: f64| beta * (x - a) + p * x.powf(p - 1.0);
    let x_c = if p < 1.0 {
        (p * (1.0 - p) / beta).powf(1.0 / (2.0 - p))
    } else {
        0.0
    };
    if x_c >= a {
        return 0.0;
    }
    let lo_d = if x_c > 0.0 { deriv(x_c) } else { beta * (0.0 - a) + p };
    if lo_d >= 0.0 {
        return 0.0;
    }
    // f' is increasing on [x_c, a] with f'(x_c) < 0 < f'(a)
    let (mut lo, mut hi) = (x_c, a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * a.max(1.0) {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    if energy(x, a, beta, p) < energy(0.0, a, beta, p) {
        s * x
    } else {
        0.0
    }
}

/// Threshold below which the proximal map is exactly zero.
fn jump_threshold(beta: f64, p: f64) -> f64 {
    if prox_exact(1.0, beta, p) == 0.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prox_exact(mid, beta, p) == 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone)]
pub struct ProxLut {
    beta: f64,
    exponent: f64,
    threshold: f64,
    table: Vec<f64>,
}

impl ProxLut {
    pub fn new(beta: f64, exponent: f64) -> Self {
        let step = 1.0 / (LUT_ENTRIES - 1) as f64;
        let table = (0..LUT_ENTRIES)
            .map(|j| prox_exact(j as f64 * step, beta, exponent))
            .collect();
        Self {
            beta,
            exponent,
            threshold: jump_threshold(beta, exponent),
            table,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn apply(&self, v: f64) -> f64 {
        let a = v.abs();
        if a < self.threshold {
            return 0.0;
        }
        let pos = a * (LUT_ENTRIES - 1) as f64;
        let j = pos.floor() as usize;
        if j + 1 >= LUT_ENTRIES {
            return if a == 1.0 {
                v.signum() * self.table[LUT_ENTRIES - 1]
            } else {
                prox_exact(v, self.beta, self.exponent)
            };
        }
        let lo_v = j as f64 / (LUT_ENTRIES - 1) as f64;
        if lo_v < self.threshold {
            return prox_exact(v, self.beta, self.exponent);
        }
        let f = pos - j as f64;
        v.signum() * ((1.0 - f) * self.table[j] + f * self.table[j + 1])
    }
}
