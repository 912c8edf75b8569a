//! Affine layer motions and exposure timing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map `p_ref = M * p_frame + t` from frame coordinates to the
/// reference (layer) coordinates.
///
/// Storing the frame-to-reference direction makes every warp a gather.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffineMotion {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for AffineMotion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineMotion {
    pub const IDENTITY: AffineMotion = AffineMotion {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    pub fn from_params(p: [f64; 6]) -> Self {
        Self {
            a11: p[0],
            a12: p[1],
            a21: p[2],
            a22: p[3],
            tx: p[4],
            ty: p[5],
        }
    }

    pub fn params(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Orientation-preserving and invertible.
    pub fn is_valid(&self) -> bool {
        let det = self.determinant();
        det.is_finite() && det > 0.0 && self.params().iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidMotion {
                det: self.determinant(),
            })
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a11 * x + self.a12 * y + self.tx,
            self.a21 * x + self.a22 * y + self.ty,
        )
    }

    pub fn inverse(&self) -> Result<AffineMotion> {
        self.validate()?;
        let det = self.determinant();
        let b11 = self.a22 / det;
        let b12 = -self.a12 / det;
        let b21 = -self.a21 / det;
        let b22 = self.a11 / det;
        Ok(AffineMotion {
            a11: b11,
            a12: b12,
            a21: b21,
            a22: b22,
            tx: -(b11 * self.tx + b12 * self.ty),
            ty: -(b21 * self.tx + b22 * self.ty),
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &AffineMotion) -> AffineMotion {
        let (tx, ty) = self.apply(other.tx, other.ty);
        AffineMotion {
            a11: self.a11 * other.a11 + self.a12 * other.a21,
            a12: self.a11 * other.a12 + self.a12 * other.a22,
            a21: self.a21 * other.a11 + self.a22 * other.a21,
            a22: self.a21 * other.a12 + self.a22 * other.a22,
            tx,
            ty,
        }
    }

    /// Re-expresses the motion on a grid resampled by `(sx, sy)` with pixel
    /// centres aligned. Pure translations just scale their offsets.
    pub fn rescaled(&self, sx: f64, sy: f64) -> AffineMotion {
        // level coords q relate to full-res p by q = s (p + 0.5) - 0.5
        let to_level = AffineMotion {
            a11: sx,
            a12: 0.0,
            a21: 0.0,
            a22: sy,
            tx: 0.5 * sx - 0.5,
            ty: 0.5 * sy - 0.5,
        };
        let from_level = to_level.inverse().expect("positive scale");
        to_level.compose(&self.compose(&from_level))
    }

    /// Largest displacement between the two maps over the corners of a
    /// `width x height` grid (the maximum of an affine difference is attained
    /// at a corner).
    pub fn max_displacement(&self, other: &AffineMotion, width: usize, height: usize) -> f64 {
        let xs = [0.0, width.saturating_sub(1) as f64];
        let ys = [0.0, height.saturating_sub(1) as f64];
        let mut m = 0.0f64;
        for &x in &xs {
            for &y in &ys {
                let (ax, ay) = self.apply(x, y);
                let (bx, by) = other.apply(x, y);
                m = m.max(((ax - bx).powi(2) + (ay - by).powi(2)).sqrt());
            }
        }
        m
    }
}

/// Linear interpolation in parameter space between the motions at two
/// consecutive frame openings: `θ_i + t_frac · duty_cycle · (θ_next − θ_i)`.
pub fn interpolate_motion(
    theta_i: &AffineMotion,
    theta_next: &AffineMotion,
    t_frac: f64,
    duty_cycle: f64,
) -> AffineMotion {
    debug_assert!((0.0..=1.0).contains(&t_frac));
    debug_assert!(duty_cycle > 0.0 && duty_cycle <= 1.0);
    let s = t_frac * duty_cycle;
    let a = theta_i.params();
    let b = theta_next.params();
    let mut p = [0.0; 6];
    for k in 0..6 {
        p[k] = a[k] + s * (b[k] - a[k]);
    }
    AffineMotion::from_params(p)
}

/// Exposure timing: duty cycle, samples per exposure `M` and frame count `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureTiming {
    pub duty_cycle: f64,
    pub samples: usize,
    pub frames: usize,
}

impl CaptureTiming {
    pub fn new(duty_cycle: f64, samples: usize, frames: usize) -> Result<Self> {
        let t = Self {
            duty_cycle,
            samples,
            frames,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::Config(format!(
                "duty cycle {} outside (0, 1]",
                self.duty_cycle
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frame count must be positive".into()));
        }
        Ok(())
    }

    /// Exposure fractions `(k − 1) / M` for `k = 1..M`.
    pub fn sample_fractions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(move |k| k as f64 / self.samples as f64)
    }
}

/// Sample count from the longest per-pixel displacement during any exposure:
/// `clamp(ceil(max motion), 2, 30)`.
pub fn auto_sample_count(
    trajectories: &[Vec<AffineMotion>],
    duty_cycle: f64,
    width: usize,
    height: usize,
) -> usize {
    let mut longest = 0.0f64;
    for traj in trajectories {
        for pair in traj.windows(2) {
            let end = interpolate_motion(&pair[0], &pair[1], 1.0, duty_cycle);
            longest = longest.max(pair[0].max_displacement(&end, width, height));
        }
    }
    (longest.ceil() as usize).clamp(2, 30)
}
