//! Conjugate gradient for symmetric positive (semi-)definite operators.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CgFailure {
    /// A residual or step became NaN or infinite.
    NonFinite,
    /// Found a search direction with non-positive curvature.
    Indefinite { curvature: f64 },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// Stops when `||r|| <= rel_tol · ||b||` or after `max_iter` iterations.
/// Singular but consistent systems are fine: the iterates never leave
/// `x0 + range(A)`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    max_iter: usize,
    rel_tol: f64,
) -> Result<CgOutcome, CgFailure> {
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut rs = dot(&r, &r);
    if !rs.is_finite() {
        return Err(CgFailure::NonFinite);
    }
    let mut iterations = 0;
    while iterations < max_iter {
        if rs.sqrt() <= rel_tol * scale {
            break;
        }
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !curvature.is_finite() {
            return Err(CgFailure::NonFinite);
        }
        if curvature <= 0.0 {
            return Err(CgFailure::Indefinite { curvature });
        }
        let step = rs / curvature;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rs_next = dot(&r, &r);
        if !rs_next.is_finite() {
            return Err(CgFailure::NonFinite);
        }
        let beta = rs_next / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_next;
        iterations += 1;
    }
    Ok(CgOutcome {
        iterations,
        relative_residual: rs.sqrt() / scale,
    })
}
