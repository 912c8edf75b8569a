//! Sequential RANSAC for the two dominant affine motions in a flow field.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flow::FlowField;
use crate::error::{Error, Result};
use crate::motion::AffineMotion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Inlier reprojection error, pixels.
    pub inlier_threshold: f64,
    /// Smallest acceptable inlier share of the second motion.
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            inlier_threshold: 1.0,
            min_inlier_fraction: 0.15,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("RANSAC needs at least one iteration".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::Config("RANSAC inlier threshold must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_inlier_fraction) {
            return Err(Error::Config("min_inlier_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionLabel {
    A,
    B,
    Outlier,
}

#[derive(Debug, Clone)]
pub struct TwoMotionFit {
    pub motion_a: AffineMotion,
    pub motion_b: AffineMotion,
    /// Row-major, one per flow pixel.
    pub labels: Vec<MotionLabel>,
    pub width: usize,
    pub height: usize,
}

impl TwoMotionFit {
    pub fn count(&self, label: MotionLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// A correspondence `p -> p + flow(p)`.
#[derive(Clone, Copy)]
struct Match {
    x: f64,
    y: f64,
    tx: f64,
    ty: f64,
}

fn matches(flow: &FlowField) -> Vec<Match> {
    let (w, h) = (flow.width(), flow.height());
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let (u, v) = (flow.u.data()[i], flow.v.data()[i]);
            Match {
                x,
                y,
                tx: x + u,
                ty: y + v,
            }
        })
        .collect()
}

fn residual(m: &AffineMotion, c: &Match) -> f64 {
    let (px, py) = m.apply(c.x, c.y);
    ((px - c.tx).powi(2) + (py - c.ty).powi(2)).sqrt()
}

/// Least-squares affine fit; `None` when the points are (nearly) collinear.
fn fit_affine<'a>(points: impl Iterator<Item = &'a Match>) -> Option<AffineMotion> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atx = Vector3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    let mut count = 0usize;
    // centre coordinates for conditioning
    let pts: Vec<&Match> = points.collect();
    if pts.len() < 3 {
        return None;
    }
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64;
    for p in &pts {
        let r = Vector3::new(p.x - cx, p.y - cy, 1.0);
        ata += r * r.transpose();
        atx += r * p.tx;
        aty += r * p.ty;
        count += 1;
    }
    let scale = ata.diagonal().max().max(1.0);
    if ata.determinant().abs() <= 1e-9 * scale.powi(2) * count as f64 {
        return None;
    }
    let chol = ata.cholesky()?;
    let px = chol.solve(&atx);
    let py = chol.solve(&aty);
    // undo the centring: x' = a (x - c) + t = a x + (t - a c)
    let m = AffineMotion::from_params([
        px[0],
        px[1],
        py[0],
        py[1],
        px[2] - px[0] * cx - px[1] * cy,
        py[2] - py[0] * cx - py[1] * cy,
    ]);
    m.params().iter().all(|v| v.is_finite()).then_some(m)
}

/// Best affine for `pool` (indices into `all`) and its inlier indices.
fn ransac_one(all: &[Match], pool: &[usize], config: &RansacConfig, rng: &mut ChaCha8Rng) -> Option<(AffineMotion, Vec<usize>)> {
    if pool.len() < 3 {
        return None;
    }
    let thr = config.inlier_threshold;
    let inliers_of = |m: &AffineMotion| -> Vec<usize> {
        pool.iter().copied().filter(|&i| residual(m, &all[i]) < thr).collect()
    };
    let mut best: Option<(AffineMotion, usize)> = None;
    for _ in 0..config.iterations {
        let i0 = pool[rng.random_range(0..pool.len())];
        let i1 = pool[rng.random_range(0..pool.len())];
        let i2 = pool[rng.random_range(0..pool.len())];
        if i0 == i1 || i1 == i2 || i0 == i2 {
            continue;
        }
        let Some(m) = fit_affine([&all[i0], &all[i1], &all[i2]].into_iter()) else {
            continue;
        };
        let score = pool.iter().filter(|&&i| residual(&m, &all[i]) < thr).count();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((m, score));
            if score == pool.len() {
                break;
            }
        }
    }
    let (mut model, _) = best?;
    let mut inliers = inliers_of(&model);
    // refit on the consensus set until it stops growing
    for _ in 0..5 {
        let Some(refit) = fit_affine(inliers.iter().map(|&i| &all[i])) else {
            break;
        };
        let next = inliers_of(&refit);
        if next.len() < inliers.len() {
            break;
        }
        let done = next == inliers;
        model = refit;
        inliers = next;
        if done {
            break;
        }
    }
    Some((model, inliers))
}

/// Fits the dominant affine motion, removes its inliers and fits a second
/// one on the rest. Motions map each pixel `p` to `p + flow(p)`.
pub fn ransac_two_affine(flow: &FlowField, config: &RansacConfig) -> Result<TwoMotionFit> {
    config.validate()?;
    let all = matches(flow);
    let total = all.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool: Vec<usize> = (0..total).collect();

    let (motion_a, inliers_a) = ransac_one(&all, &pool, config, &mut rng)
        .ok_or_else(|| Error::Numeric("no non-degenerate affine sample in the flow field".into()))?;
    let mut taken = vec![false; total];
    for &i in &inliers_a {
        taken[i] = true;
    }
    let rest: Vec<usize> = pool.into_iter().filter(|&i| !taken[i]).collect();
    let second = ransac_one(&all, &rest, config, &mut rng);
    let (motion_b, inliers_b) = match second {
        Some(fit) => fit,
        None => {
            return Err(Error::SingleMotion {
                motion: motion_a,
                second_fraction: 0.0,
            })
        }
    };
    let fraction = inliers_b.len() as f64 / total as f64;
    if fraction < config.min_inlier_fraction {
        return Err(Error::SingleMotion {
            motion: motion_a,
            second_fraction: fraction,
        });
    }

    let thr = config.inlier_threshold;
    let labels = all
        .iter()
        .map(|c| {
            let (ra, rb) = (residual(&motion_a, c), residual(&motion_b, c));
            if ra.min(rb) >= thr {
                MotionLabel::Outlier
            } else if ra <= rb {
                MotionLabel::A
            } else {
                MotionLabel::B
            }
        })
        .collect();
    Ok(TwoMotionFit {
        motion_a,
        motion_b,
        labels,
        width: flow.width(),
        height: flow.height(),
    })
}
