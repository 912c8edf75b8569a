//! Derivative-free Nelder-Mead simplex minimization with the standard
//! coefficients (reflection 1, expansion 2, contraction 0.5, shrink 0.5).

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Per-coordinate offsets that span the initial simplex.
    pub initial_step: Vec<f64>,
    pub max_evals: usize,
    /// Stop when the spread of simplex values drops below this.
    pub f_tol: f64,
    /// ... and every vertex is within this distance of the best one.
    pub x_tol: f64,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. `f` may fail, which aborts the search.
pub fn nelder_mead<E>(
    mut f: impl FnMut(&[f64]) -> Result<f64, E>,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<NelderMeadResult, E> {
    let dim = x0.len();
    assert_eq!(opts.initial_step.len(), dim);
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64, E> {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0, &mut evals)?;
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        if evals >= opts.max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += opts.initial_step[i];
        let fx = eval(&x, &mut evals)?;
        simplex.push((x, fx));
    }
    if simplex.len() < dim + 1 {
        let best = simplex
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty simplex");
        return Ok(NelderMeadResult {
            x: best.0,
            f: best.1,
            evals,
            converged: false,
        });
    }

    let mut converged = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && size <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            if evals >= opts.max_evals {
                simplex[dim] = (xr, fr);
                break;
            }
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe, &mut evals)?;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        if evals >= opts.max_evals {
            break;
        }
        // contraction: outside if the reflection beat the worst point
        let (xc, fc) = if fr < simplex[dim].1 {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc, &mut evals)?;
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc, &mut evals)?;
            (xc, fc)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= opts.max_evals {
                break;
            }
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            let fx = eval(&x, &mut evals)?;
            *vertex = (x, fx);
        }
    }
    let (x, fx) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty simplex");
    Ok(NelderMeadResult {
        x,
        f: fx,
        evals,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| -> Result<f64, Infallible> {
            Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        };
        let opts = NelderMeadOptions {
            initial_step: vec![0.5, 0.5],
            max_evals: 2000,
            f_tol: 1e-14,
            x_tol: 1e-8,
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &opts).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn respects_evaluation_budget() {
        let mut calls = 0;
        let opts = NelderMeadOptions {
            initial_step: vec![0.1; 6],
            max_evals: 37,
            f_tol: 0.0,
            x_tol: 0.0,
        };
        let r = nelder_mead(
            |x: &[f64]| -> Result<f64, Infallible> {
                calls += 1;
                Ok(x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2)).sum())
            },
            &[0.0; 6],
            &opts,
        )
        .unwrap();
        assert!(calls <= 37);
        assert_eq!(r.evals, calls);
    }

    #[test]
    fn error_aborts_search() {
        let opts = NelderMeadOptions {
            initial_step: vec![1.0],
            max_evals: 50,
            f_tol: 0.0,
            x_tol: 0.0,
        };
        let r = nelder_mead(|x: &[f64]| if x[0] > 0.5 { Err("boom") } else { Ok(-x[0]) }, &[0.0], &opts);
        assert_eq!(r.unwrap_err(), "boom");
    }
}
